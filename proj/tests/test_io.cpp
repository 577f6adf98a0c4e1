#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "noisecnn/checkpoint.hpp"
#include "noisecnn/config.hpp"
#include "noisecnn/experiment.hpp"

using namespace noisecnn;

namespace {

Checkpoint sample_checkpoint(bool noise) {
  Rng rng(3);
  Checkpoint c;
  c.variant = noise ? "nmwregu" : "wonm";
  c.config.embed_dim = 3;
  c.config.t_fixed = 6;
  c.config.windows = {2, 3};
  c.config.feature_maps = 2;
  c.config.num_classes = 3;
  c.config.noise_layer = noise;
  c.vocab = Vocab::from_tokens({"<pad>", "<unk>", "alpha", "beta", "gamma"});
  c.labels = LabelMap({"x", "y", "z"});
  c.model.theta = testutil::small_model(5, 3, {2, 3}, 2, 3, rng);
  if (noise) c.model.noise = init_noise_layer(3, NoiseInit::identity_gain, 0.0, nullptr, rng);
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  for (bool noise : {true, false}) {
    auto c = sample_checkpoint(noise);
    c.model.theta.embedding(2, 1) = 0.1 + 0.2;  // not representable as a short decimal
    auto path = testutil::scratch(noise ? "nm.ckpt" : "wonm.ckpt");
    save_checkpoint(path, c);
    auto back = load_checkpoint(path);
    CHECK(back.variant == c.variant);
    CHECK(back.config.windows == c.config.windows);
    CHECK(back.config.num_classes == 3);
    CHECK(back.vocab.tokens() == c.vocab.tokens());
    CHECK(back.labels.names() == c.labels.names());
    auto a = c.model.theta.blocks();
    auto b = back.model.theta.blocks();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].first == b[i].first);
      CHECK(*a[i].second == *b[i].second);
    }
    CHECK(back.model.noise.has_value() == noise);
    if (noise) CHECK(back.model.noise->psi == c.model.noise->psi);
  }

  auto junk = testutil::scratch("junk.ckpt");
  std::ofstream(junk) << "not a checkpoint\n";
  CHECK_THROWS(load_checkpoint(junk));
  CHECK_THROWS(load_checkpoint(testutil::scratch("missing.ckpt")));
}

TEST_CASE("ini parsing") {
  auto ini = IniFile::parse("# comment\n[a]\nx = 1\ny=two ; trailing\n[b]\nx = 3\n");
  CHECK(ini.get("a", "x") == "1");
  CHECK(ini.get("a", "y") == "two");
  CHECK(ini.get("b", "x") == "3");
  CHECK_FALSE(ini.get("a", "z").has_value());
  CHECK(ini.unused().empty());
  CHECK_THROWS(IniFile::parse("[a]\nx=1\nx=2\n"));
  CHECK_THROWS(IniFile::parse("[a]\njust words\n"));
  auto again = IniFile::parse(ini.str());
  CHECK(again.get("b", "x") == "3");
}

TEST_CASE("experiment config") {
  SUBCASE("defaults per variant") {
    auto nm = ExperimentConfig::from_ini(IniFile::parse("[experiment]\nvariant = nmwregu\n"));
    CHECK(nm.train.lambda == 0.01);
    CHECK(nm.model.init_mode == NoiseInit::identity_gain);
    auto wo = ExperimentConfig::from_ini(IniFile::parse("[experiment]\nvariant = wonm\n"));
    CHECK(wo.train.lambda == 0.0);
    auto td = ExperimentConfig::from_ini(
        IniFile::parse("[experiment]\nvariant = tdwregu\n[noise]\nkind = uniform\np = 0.4\n"));
    CHECK(td.model.init_mode == NoiseInit::true_distribution);
  }
  SUBCASE("invalid settings name the field") {
    auto expect_error = [](const std::string& text, const std::string& field) {
      try {
        ExperimentConfig::from_ini(IniFile::parse(text));
        FAIL("expected an error for " << field);
      } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find(field) != std::string::npos);
      }
    };
    expect_error("[experiment]\nvariant = wonm\n[model]\ngain = 4\n", "model.gain");
    expect_error("[experiment]\nvariant = wonm\n[train]\nlambda = 0.01\n", "train.lambda");
    expect_error("[experiment]\nvariant = nmwregu\n[train]\nlambda = 0\n", "train.lambda");
    expect_error("[experiment]\nvariant = nmworegu\n[train]\nlambda = 0.5\n", "train.lambda");
    expect_error("[experiment]\nvariant = bogus\n", "experiment.variant");
    expect_error("[train]\nbatch_size = 0\n", "train.batch_size");
    expect_error("[train]\nbatchsize = 10\n", "train.batchsize");
    expect_error("[noise]\nkind = uniform\np = 1.5\n", "noise.p");
    expect_error("[experiment]\nvariant = tdwregu\n", "noise.kind");
  }
  SUBCASE("echo round trip") {
    auto cfg = ExperimentConfig::from_ini(IniFile::parse(
        "[experiment]\nvariant = nmwregu\nseed = 9\n[noise]\nkind = random\np = 0.3\n[model]\nwindows = 2,4\n"));
    auto back = ExperimentConfig::from_ini(IniFile::parse(cfg.to_ini().str()));
    CHECK(back.to_ini().str() == cfg.to_ini().str());
    CHECK(back.seed == 9);
    CHECK(back.model.windows == std::vector<std::size_t>{2, 4});
  }
}

TEST_CASE("repeat seeds") {
  CHECK(repeat_seed(42, 0) == 42);
  CHECK(repeat_seed(42, 1) != 42);
  CHECK(repeat_seed(42, 1) != repeat_seed(42, 2));
}
