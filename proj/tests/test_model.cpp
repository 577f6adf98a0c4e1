#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "noisecnn/gradcheck.hpp"
#include "noisecnn/model.hpp"
#include "noisecnn/ops.hpp"

using namespace noisecnn;
using testutil::random_matrix;

namespace {

// Straight-line evaluation-mode forward pass, written independently of ops::.
std::vector<double> oracle_forward(const EncodedSentence& x, const BaseModelParams& p) {
  const std::size_t d = p.embed_dim(), T = x.tokens.size();
  std::vector<double> pooled;
  for (std::size_t wi = 0; wi < p.windows.size(); ++wi) {
    const std::size_t w = p.windows[wi];
    for (std::size_t f = 0; f < p.filters[wi].rows(); ++f) {
      double best = -INFINITY;
      for (std::size_t t = 0; t + w <= T; ++t) {
        double a = p.biases[wi][f];
        for (std::size_t k = 0; k < w; ++k)
          for (std::size_t c = 0; c < d; ++c) a += p.filters[wi](f, k * d + c) * p.embedding(x.tokens[t + k], c);
        best = std::max(best, std::max(a, 0.0));
      }
      pooled.push_back(best);
    }
  }
  const std::size_t K = p.dense_w.rows();
  std::vector<double> z(K);
  double mx = -INFINITY;
  for (std::size_t k = 0; k < K; ++k) {
    z[k] = p.dense_b[k];
    for (std::size_t j = 0; j < pooled.size(); ++j) z[k] += p.dense_w(k, j) * pooled[j];
    mx = std::max(mx, z[k]);
  }
  double s = 0.0;
  for (auto& v : z) s += (v = std::exp(v - mx));
  for (auto& v : z) v /= s;
  return z;
}

EncodedSentence random_sentence(std::size_t T, std::size_t vocab, std::size_t K, Rng& rng) {
  EncodedSentence x;
  for (std::size_t t = 0; t < T; ++t) x.tokens.push_back(rng.below(vocab));
  x.label = rng.below(K);
  x.noisy_label = rng.below(K);
  return x;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.pooled_dim() == 300);
  cfg.num_classes = 4;
  CHECK(cfg.effective_gain() == 4.0);
  cfg.windows = {25};
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.keep = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.num_classes = 1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("noise layer init") {
  Rng rng(1);
  auto id = init_noise_layer(4, NoiseInit::identity_gain, 0.0, nullptr, rng);
  CHECK(id.psi == Matrix::identity(4, 4.0));
  auto g2 = init_noise_layer(3, NoiseInit::identity_gain, 2.5, nullptr, rng);
  CHECK(g2.psi == Matrix::identity(3, 2.5));

  TransitionMatrix ident(Matrix::identity(3), NoiseKind::custom);
  auto td = init_noise_layer(3, NoiseInit::true_distribution, 0.0, &ident, rng);
  CHECK(td.psi(1, 1) == doctest::Approx(std::log(1.0 + 1e-12)));
  CHECK(td.psi(0, 1) == doctest::Approx(std::log(1e-12)));
  auto phi = build_uniform_noise(4, 0.4);
  auto td4 = init_noise_layer(4, NoiseInit::true_distribution, 0.0, &phi, rng);
  Matrix resp = softmax_response(td4.psi);
  for (std::size_t i = 0; i < 16; ++i) CHECK(resp[i] == doctest::Approx(phi.phi()[i]).epsilon(1e-9));
  CHECK_THROWS(init_noise_layer(3, NoiseInit::true_distribution, 0.0, nullptr, rng));

  Rng a(9), b(9);
  auto r1 = init_noise_layer(4, NoiseInit::random, 0.0, nullptr, a);
  auto r2 = init_noise_layer(4, NoiseInit::random, 0.0, nullptr, b);
  CHECK(r1.psi == r2.psi);
  for (double v : r1.psi.data()) CHECK(std::fabs(v) <= 0.25);
}

TEST_CASE("forward_base") {
  Rng rng(4);
  SUBCASE("zero weights give a uniform output") {
    auto p = testutil::small_model(10, 3, {2, 3}, 2, 3, rng);
    for (auto& [name, m] : p.blocks()) m->fill(0.0);
    auto out = forward_base(random_sentence(5, 10, 3, rng), p, false, nullptr);
    for (double v : out.data()) CHECK(v == doctest::Approx(1.0 / 3));
  }
  SUBCASE("matches the straight-line oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      auto p = testutil::small_model(12, 4, {2}, 3, 2, rng);
      auto x = random_sentence(6, 12, 2, rng);
      auto out = forward_base(x, p, false, nullptr);
      auto ref = oracle_forward(x, p);
      for (std::size_t k = 0; k < 2; ++k) CHECK(out[k] == doctest::Approx(ref[k]).epsilon(1e-12));
    }
    auto p = testutil::small_model(12, 4, {2, 3, 4}, 3, 3, rng);
    auto x = random_sentence(7, 12, 3, rng);
    auto out = forward_base(x, p, false, nullptr);
    auto ref = oracle_forward(x, p);
    for (std::size_t k = 0; k < 3; ++k) CHECK(out[k] == doctest::Approx(ref[k]).epsilon(1e-12));
  }
  SUBCASE("evaluation is deterministic; training uses dropout") {
    auto p = testutil::small_model(12, 4, {2}, 8, 2, rng);
    auto x = random_sentence(6, 12, 2, rng);
    CHECK(forward_base(x, p, false, nullptr) == forward_base(x, p, false, nullptr));
    CHECK(pooled_features(x, p) == pooled_features(x, p));
    CHECK(pooled_features(x, p).size() == 8);
    Rng d1(1), d2(1);
    CHECK(forward_base(x, p, true, &d1) == forward_base(x, p, true, &d2));
  }
  SUBCASE("sentences shorter than a window are refused") {
    auto p = testutil::small_model(12, 4, {3}, 2, 2, rng);
    CHECK_THROWS(forward_base(random_sentence(2, 12, 2, rng), p, false, nullptr));
  }
}

TEST_CASE("forward_noisy") {
  Rng rng(6);
  auto p = testutil::small_model(15, 4, {2, 3}, 4, 3, rng);
  SUBCASE("zero psi is uniform") {
    auto out = forward_noisy(random_sentence(6, 15, 3, rng), p, Matrix(3, 3), false, nullptr);
    for (double v : out.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  SUBCASE("closed form for psi = 2I on a one-hot base output") {
    Matrix q = apply_noise_layer(Matrix::identity(2, 2.0), Matrix{{1}, {0}});
    CHECK(q[0] == doctest::Approx(0.880797).epsilon(1e-6));
    CHECK(q[1] == doctest::Approx(0.119203).epsilon(1e-6));
  }
  SUBCASE("output is a probability vector and psi = cI keeps the argmax") {
    for (int trial = 0; trial < 100; ++trial) {
      auto x = random_sentence(6, 15, 3, rng);
      Matrix psi = random_matrix(3, 3, rng, 5.0);
      auto q = forward_noisy(x, p, psi, false, nullptr);
      double s = 0.0;
      for (double v : q.data()) s += v;
      CHECK(std::fabs(s - 1.0) <= 1e-12);
      const double c = rng.uniform(0.01, 10.0);
      auto qc = forward_noisy(x, p, Matrix::identity(3, c), false, nullptr);
      auto base = forward_base(x, p, false, nullptr);
      CHECK(ops::argmax(qc.data()) == ops::argmax(base.data()));
      CHECK(predict_clean(x, p) == ops::argmax(qc.data()));
    }
  }
  CHECK_THROWS(forward_noisy(random_sentence(6, 15, 3, rng), p, Matrix(2, 2), false, nullptr));
  CHECK_THROWS(apply_noise_layer(Matrix(3, 3), Matrix(2, 1)));
}

TEST_CASE("loss") {
  Rng rng(12);
  auto p = testutil::small_model(15, 4, {2}, 3, 4, rng);
  std::vector<EncodedSentence> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(random_sentence(6, 15, 4, rng));
  std::vector<const EncodedSentence*> batch;
  for (auto& x : xs) batch.push_back(&x);

  SUBCASE("zero psi, no regularizer is ln K") {
    Matrix psi(4, 4);
    Rng d(1);
    CHECK(loss(batch, p, &psi, 0.0, &d).value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("regularizer contribution") {
    Matrix psi = Matrix::identity(4);
    Rng d1(1), d2(1);
    const double with = loss(batch, p, &psi, 0.01, &d1).value;
    const double without = loss(batch, p, &psi, 0.0, &d2).value;
    CHECK(with - without == doctest::Approx(0.02).epsilon(1e-12));
  }
  SUBCASE("loss(0) + lambda/2 ||psi||^2 == loss(lambda)") {
    for (int trial = 0; trial < 10; ++trial) {
      Matrix psi = random_matrix(4, 4, rng, 3.0);
      const double lambda = rng.uniform(0.0, 5.0);
      Rng d1(trial), d2(trial);
      const double a = loss(batch, p, &psi, 0.0, &d1).value + 0.5 * lambda * frobenius_sq(psi);
      const double b = loss(batch, p, &psi, lambda, &d2).value;
      CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
  }
  SUBCASE("missing noisy labels") {
    EncodedSentence clean = xs[0];
    clean.noisy_label.reset();
    const EncodedSentence* one[] = {&clean};
    Rng d(1);
    Matrix psi = Matrix::identity(4);
    CHECK_THROWS(loss(one, p, &psi, 0.0, &d));
  }
}

TEST_CASE("full loss gradient matches finite differences") {
  Rng rng(31);
  auto theta = testutil::small_model(10, 4, {2, 3}, 3, 3, rng);
  Matrix psi = random_matrix(3, 3, rng, 2.0);
  std::vector<EncodedSentence> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(random_sentence(8, 10, 3, rng));
  std::vector<const EncodedSentence*> batch;
  for (auto& x : xs) batch.push_back(&x);
  const double lambda = 0.01;

  for (bool with_noise : {true, false}) {
    CAPTURE(with_noise);
    Matrix* ps = with_noise ? &psi : nullptr;
    Rng d0(77);
    LossResult r = loss(batch, theta, ps, lambda, &d0);
    auto f = [&] {
      Rng d(77);
      return loss(batch, theta, ps, lambda, &d).value;
    };
    std::vector<GradBlock> blocks;
    auto params = theta.blocks();
    auto grads = std::as_const(r.grad_theta).blocks();
    for (std::size_t i = 0; i < params.size(); ++i) blocks.push_back({params[i].first, params[i].second, grads[i].second});
    if (with_noise) blocks.push_back({"noise.psi", &psi, &r.grad_psi});
    GradCheckOptions opts;
    opts.coords_per_block = 20;
    opts.seed = 5;
    auto report = grad_check(f, blocks, opts);
    CHECK(report.passed);
    CHECK(report.max_rel_error <= 1e-3);
  }
}

TEST_CASE("clean prediction and references") {
  Rng rng(2);
  auto p = testutil::small_model(10, 3, {2}, 2, 2, rng);
  auto x = random_sentence(5, 10, 2, rng);
  CHECK(predict_clean(x, p) == predict_clean(x, p));
  CHECK(ops::argmax(std::vector<double>{0.1, 0.9}) == 1);

  auto base = Matrix{{0.3}, {0.7}};
  CHECK(marginalize_reference(TransitionMatrix(Matrix::identity(2), NoiseKind::custom), base) == base);
  auto u = marginalize_reference(build_uniform_noise(3, 1.0), Matrix{{0.2}, {0.5}, {0.3}});
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3));
  auto m = marginalize_reference(TransitionMatrix(Matrix{{0.8, 0.3}, {0.2, 0.7}}, NoiseKind::custom),
                                 Matrix{{0.5}, {0.5}});
  CHECK(m[0] == doctest::Approx(0.55));
  CHECK(m[1] == doctest::Approx(0.45));
  CHECK_THROWS(marginalize_reference(build_uniform_noise(3, 0.2), base));

  Matrix resp = softmax_response(Matrix::identity(2, 2.0));
  CHECK(resp(0, 0) == doctest::Approx(0.880797).epsilon(1e-6));
  CHECK(resp(1, 0) == doctest::Approx(0.119203).epsilon(1e-6));
}
