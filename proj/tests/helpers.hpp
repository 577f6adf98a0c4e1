#pragma once
#include <cmath>
#include <filesystem>
#include <string>

#include "noisecnn/matrix.hpp"
#include "noisecnn/model.hpp"
#include "noisecnn/rng.hpp"

namespace testutil {

inline noisecnn::Matrix random_matrix(std::size_t r, std::size_t c, noisecnn::Rng& rng,
                                      double scale = 1.0) {
  noisecnn::Matrix m(r, c);
  for (auto& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

inline noisecnn::BaseModelParams small_model(std::size_t vocab, std::size_t d,
                                             std::vector<std::size_t> windows, std::size_t F,
                                             std::size_t K, noisecnn::Rng& rng, double keep = 0.5) {
  noisecnn::ModelConfig cfg;
  cfg.embed_dim = d;
  cfg.windows = std::move(windows);
  cfg.feature_maps = F;
  cfg.num_classes = K;
  cfg.keep = keep;
  auto p = noisecnn::init_base_params(random_matrix(vocab, d, rng, 0.5), cfg, rng);
  for (auto& b : p.biases) b = random_matrix(b.rows(), 1, rng, 0.1);
  p.dense_b = random_matrix(K, 1, rng, 0.1);
  return p;
}

inline std::filesystem::path scratch(const std::string& name) {
  std::filesystem::path dir = NOISECNN_TEST_TMP;
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace testutil
