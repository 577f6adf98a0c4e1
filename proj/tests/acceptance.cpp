// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "noisecnn/config.hpp"
#include "noisecnn/experiment.hpp"
#include "noisecnn/gradcheck.hpp"
#include "noisecnn/model.hpp"
#include "noisecnn/noisegen.hpp"
#include "noisecnn/ops.hpp"
#include "noisecnn/train.hpp"

using namespace noisecnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream o;
  o << std::scientific << std::setprecision(2) << v;
  return o.str();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Desk-scale synthetic setup shared by the training criteria.
std::string synthetic_config(const std::string& variant, std::uint64_t seed, const std::string& noise,
                             const std::string& extra_train = "") {
  return "[experiment]\nvariant = " + variant + "\nseed = " + std::to_string(seed) +
         "\n[synthetic]\nclasses = 4\nn_train = 4000\nn_dev = 500\nn_test = 500\nmax_len = 20\n"
         "[model]\nt_fixed = 20\nembed_dim = 16\nfeature_maps = 32\n"
         "[train]\nmax_epochs = 30\n" +
         extra_train + "[noise]\n" + noise;
}

ExperimentConfig parse(const std::string& text) { return ExperimentConfig::from_ini(IniFile::parse(text)); }

std::string uniform_noise(double p) { return "kind = uniform\np = " + fmt(p, 2) + "\n"; }

// Runs are cached so criteria 6, 8 and 9 share their training.
struct RunCache {
  std::map<std::string, RunOutput> runs;
  std::map<std::string, PreparedData> data;

  const PreparedData& prepared(const ExperimentConfig& cfg, const std::string& key) {
    auto it = data.find(key);
    if (it == data.end()) it = data.emplace(key, prepare_data(cfg, cfg.seed)).first;
    return it->second;
  }

  const RunOutput& run(const std::string& variant, std::uint64_t seed, double p,
                       const std::string& extra_train = "") {
    const std::string key = variant + "/" + std::to_string(seed) + "/" + fmt(p, 2) + "/" + extra_train;
    auto it = runs.find(key);
    if (it != runs.end()) return it->second;
    const auto cfg = parse(synthetic_config(variant, seed, uniform_noise(p), extra_train));
    const PreparedData& d = prepared(cfg, std::to_string(seed) + "/" + fmt(p, 2));
    return runs.emplace(key, run_experiment(cfg, seed, &d)).first->second;
  }
};

RunCache cache;

Outcome criterion1() {
  auto u = build_uniform_noise(4, 0.4);
  bool exact = true;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) exact = exact && u.phi()(i, j) == (i == j ? 0.7 : 0.1);
  bool diag = true, columns = true;
  Rng rng(derive_seed(1, "noise_matrix"));
  auto column_ok = [](const Matrix& m) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j);
      if (std::fabs(s - 1.0) > 1e-9) return false;
    }
    return true;
  };
  columns = column_ok(u.phi());
  for (std::size_t K : {2u, 3u, 4u, 5u, 10u}) {
    for (double p : {0.0, 0.1, 0.4, 0.6, 0.95, 1.0}) {
      auto r = build_random_noise(K, p, rng);
      for (std::size_t j = 0; j < K; ++j) diag = diag && r.phi()(j, j) == 1.0 - p;
      columns = columns && column_ok(r.phi()) && column_ok(build_uniform_noise(K, p).phi());
    }
  }
  return {exact && diag && columns, "uniform exact=" + std::string(exact ? "yes" : "no") +
                                        " random diag exact=" + (diag ? "yes" : "no") +
                                        " columns sum to 1=" + (columns ? "yes" : "no")};
}

Outcome criterion2() {
  const std::size_t n = 100000;
  std::vector<std::size_t> clean(n);
  for (std::size_t i = 0; i < n; ++i) clean[i] = i % 4;
  Rng rng(derive_seed(2, "corruption"));
  const double fu = flip_fraction(clean, sample_noisy_labels(clean, build_uniform_noise(4, 0.4), rng));
  const double fr = flip_fraction(clean, sample_noisy_labels(clean, build_random_noise(4, 0.4, rng), rng));
  const bool pass = std::fabs(fu - 0.30) <= 0.01 && std::fabs(fr - 0.40) <= 0.01;
  return {pass, "uniform flip=" + fmt(fu) + " (0.30+-0.01) random flip=" + fmt(fr) + " (0.40+-0.01)"};
}

Outcome criterion3() {
  Rng rng(derive_seed(3, "init"));
  const std::size_t vocab = 12, d = 4, T = 8, K = 3, F = 3;
  ModelConfig mc;
  mc.embed_dim = d;
  mc.t_fixed = T;
  mc.windows = {2, 3, 4};
  mc.feature_maps = F;
  mc.num_classes = K;
  Matrix emb(vocab, d);
  for (auto& v : emb.data()) v = rng.uniform(-0.5, 0.5);
  BaseModelParams theta = init_base_params(emb, mc, rng);
  for (auto& b : theta.biases)
    for (auto& v : b.data()) v = rng.uniform(-0.1, 0.1);
  for (auto& v : theta.dense_b.data()) v = rng.uniform(-0.1, 0.1);
  Matrix psi(K, K);
  for (auto& v : psi.data()) v = rng.uniform(-2.0, 2.0);

  std::vector<EncodedSentence> xs(6);
  for (auto& x : xs) {
    for (std::size_t t = 0; t < T; ++t) x.tokens.push_back(rng.below(vocab));
    x.label = rng.below(K);
    x.noisy_label = rng.below(K);
  }
  std::vector<const EncodedSentence*> batch;
  for (auto& x : xs) batch.push_back(&x);
  const double lambda = 0.01;
  const std::uint64_t dropout_seed = derive_seed(3, "dropout");

  Rng d0(dropout_seed);
  LossResult r = loss(batch, theta, &psi, lambda, &d0);
  auto f = [&] {
    Rng dr(dropout_seed);
    return loss(batch, theta, &psi, lambda, &dr).value;
  };
  std::vector<GradBlock> blocks;
  auto params = theta.blocks();
  auto grads = std::as_const(r.grad_theta).blocks();
  for (std::size_t i = 0; i < params.size(); ++i) blocks.push_back({params[i].first, params[i].second, grads[i].second});
  blocks.push_back({"noise.psi", &psi, &r.grad_psi});
  GradCheckOptions opts;
  opts.coords_per_block = 20;
  opts.seed = 3;
  auto report = grad_check(f, blocks, opts);
  return {report.passed && report.max_rel_error <= 1e-3,
          std::to_string(blocks.size()) + " blocks, " + std::to_string(report.entries.size()) +
              " coordinates, max rel error=" + sci(report.max_rel_error)};
}

Outcome criterion4() {
  Matrix u = apply_noise_layer(Matrix(4, 4), Matrix{{0.7}, {0.1}, {0.15}, {0.05}});
  bool uniform = true;
  for (double v : u.data()) uniform = uniform && std::fabs(v - 0.25) <= 1e-12;
  Matrix q = apply_noise_layer(Matrix::identity(2, 2.0), Matrix{{1}, {0}});
  const bool closed = std::fabs(q[0] - 0.880797) <= 1e-6 && std::fabs(q[1] - 0.119203) <= 1e-6;
  Rng rng(derive_seed(4, "repeat"));
  std::size_t agree = 0;
  const std::size_t trials = 1000;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t K = 2 + rng.below(9);
    Matrix z(K, 1);
    for (auto& v : z.data()) v = rng.uniform(-4.0, 4.0);
    const Matrix p = ops::softmax(z);
    const double c = std::exp(rng.uniform(std::log(0.01), std::log(100.0)));
    agree += ops::argmax(apply_noise_layer(Matrix::identity(K, c), p).data()) == ops::argmax(p.data());
  }
  return {uniform && closed && agree == trials,
          "psi=0 uniform=" + std::string(uniform ? "yes" : "no") + " psi=2I -> (" + fmt(q[0], 6) + ", " +
              fmt(q[1], 6) + ") argmax preserved " + std::to_string(agree) + "/" + std::to_string(trials)};
}

Outcome criterion5() {
  const auto cfg = parse(synthetic_config("wonm", 1, "kind = none\n"));
  const RunOutput out = run_experiment(cfg, cfg.seed);
  const std::size_t epochs = out.record.epochs.size();
  return {out.test_acc >= 0.95 && epochs <= 30,
          "clean test acc=" + fmt(out.test_acc) + " after " + std::to_string(epochs) + " epochs (best " +
              std::to_string(out.record.best_epoch.value_or(0)) + ")"};
}

Outcome criterion6() {
  std::ostringstream detail;
  bool pass = true;
  for (auto [p, need] : {std::pair{0.4, 0.05}, std::pair{0.6, 0.08}}) {
    double wonm = 0.0, nm = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      wonm += cache.run("wonm", seed, p).test_acc / 3.0;
      nm += cache.run("nmwregu", seed, p).test_acc / 3.0;
    }
    const double gap = nm - wonm;
    pass = pass && gap >= need;
    detail << "p=" << fmt(p, 1) << ": nmwregu " << fmt(nm) << " vs wonm " << fmt(wonm) << " gap "
           << fmt(gap) << " (need " << fmt(need, 2) << "); ";
  }
  return {pass, detail.str()};
}

Outcome criterion7() {
  const auto cfg = parse(synthetic_config("nmwregu", 1, "kind = custom\nkeep_rates = 0.9,0.7,0.8,0.6\n"));
  const RunOutput out = run_experiment(cfg, cfg.seed);
  const Matrix response = column_normalize(softmax_response(out.checkpoint.model.noise->psi));
  const Matrix phi = build_class_dependent_noise(std::vector<double>{0.9, 0.7, 0.8, 0.6}).phi();
  const double r = pearson(response, phi);
  return {r >= 0.9, "pearson(response, phi)=" + fmt(r) + " (need >= 0.9)"};
}

Outcome criterion8() {
  const RunOutput& free_run = cache.run("nmworegu", 1, 0.4);
  const RunOutput& heavy = cache.run("nmwregu", 1, 0.4, "lambda = 10\n");
  const double n0 = frobenius_norm(free_run.checkpoint.model.noise->psi);
  const double n10 = frobenius_norm(heavy.checkpoint.model.noise->psi);
  int wins = 0;
  std::ostringstream accs;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const double a = cache.run("nmwregu", seed, 0.4).test_acc;
    const double b = cache.run("nmworegu", seed, 0.4).test_acc;
    wins += a >= b;
    accs << " seed" << seed << ":" << fmt(a) << "/" << fmt(b);
  }
  return {n10 < n0 && wins >= 2, "||psi|| lambda=10 " + fmt(n10) + " < lambda=0 " + fmt(n0) +
                                      "; acc lambda=0.01/lambda=0" + accs.str() + " (" +
                                      std::to_string(wins) + "/3 seeds)"};
}

Outcome criterion9() {
  const RunOutput& base = cache.run("wonm", 1, 0.4);
  const RunOutput& proposed = cache.run("nmwregu", 1, 0.4);
  const auto cfg = parse(synthetic_config("wonm", 1, uniform_noise(0.4)));
  const PreparedData& d = cache.prepared(cfg, "1/0.40");
  std::vector<std::size_t> noisy, clean, test_labels;
  for (const auto& e : d.train.examples) {
    clean.push_back(e.label);
    noisy.push_back(*e.noisy_label);
  }
  for (const auto& e : d.test.examples) test_labels.push_back(e.label);
  const ProbeConfig pc{1.0, 20, derive_seed(1, "probe")};
  auto probe = [&](const BaseModelParams& theta, const std::vector<std::size_t>& targets) {
    return linear_probe(extract_features(d.train, theta), targets, extract_features(d.test, theta), test_labels,
                        d.train.num_classes, pc);
  };
  const double trb_true = probe(base.checkpoint.model.theta, clean);
  const double trb_noisy = probe(base.checkpoint.model.theta, noisy);
  const double trpr_true = probe(proposed.checkpoint.model.theta, clean);
  const bool pass = trpr_true >= trb_true && std::fabs(trb_noisy - base.test_acc) <= 0.05;
  return {pass, "TRPr/true=" + fmt(trpr_true) + " TRB/true=" + fmt(trb_true) + " TRB/noisy=" + fmt(trb_noisy) +
                    " wonm test acc=" + fmt(base.test_acc)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome criterion10() {
  const fs::path dir = NOISECNN_TEST_TMP;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "determinism.ini";
  std::ofstream(cfg) << "[experiment]\nvariant = nmwregu\nseed = 5\n"
                        "[synthetic]\nn_train = 800\nn_dev = 200\nn_test = 200\n"
                        "[model]\nembed_dim = 8\nfeature_maps = 8\n"
                        "[train]\nmax_epochs = 4\n[noise]\nkind = uniform\np = 0.4\n";
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + NOISECNN_CLI_PATH + "\" train --config \"" + cfg.string() +
                            "\" --out \"" + (dir / run).string() + "\" > \"" + (dir / run).string() + ".log\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, std::string("train run ") + run + " failed"};
  }
  const bool metrics = slurp(dir / "a/metrics.jsonl") == slurp(dir / "b/metrics.jsonl");
  const bool ckpt = slurp(dir / "a/model.ckpt") == slurp(dir / "b/model.ckpt");
  const bool nonempty = !slurp(dir / "a/model.ckpt").empty() && !slurp(dir / "a/metrics.jsonl").empty();
  return {metrics && ckpt && nonempty, std::string("metrics.jsonl identical=") + (metrics ? "yes" : "no") +
                                           " model.ckpt identical=" + (ckpt ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime limit
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "noise constructors", 1.0, criterion1},
      {2, "corruption statistics", 5.0, criterion2},
      {3, "gradient suite", 30.0, criterion3},
      {4, "noise layer sanity", 0.0, criterion4},
      {5, "clean-training baseline", 120.0, criterion5},
      {6, "robustness trend", 900.0, criterion6},
      {7, "noise recovery", 600.0, criterion7},
      {8, "regularizer effect", 0.0, criterion8},
      {9, "probe trend", 0.0, criterion9},
      {10, "determinism", 0.0, criterion10},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt(secs, 1) + "s";
    if (c.limit_s > 0.0) {
      timing += " (limit " + fmt(c.limit_s, 0) + "s)";
      if (secs >= c.limit_s) {
        o.pass = false;
        timing += " over time";
      }
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " [" << c.name << "] " << o.detail
              << " [" << timing << "]" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
