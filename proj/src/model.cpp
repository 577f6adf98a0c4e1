#include "noisecnn/model.hpp"

#include <cmath>
#include <stdexcept>

#include "noisecnn/ops.hpp"
#include "noisecnn/tape.hpp"

namespace noisecnn {

namespace {

struct BaseGraph {
  Var pooled;
  Var logits;
  Var probs;
};

// Records the base classifier on `g`. With `grads` set, every parameter input
// routes its gradient into the matching block of `grads`.
BaseGraph record_base(GradTape& g, const EncodedSentence& x, const BaseModelParams& theta,
                      BaseModelParams* grads, bool train_mode, Rng* rng) {
  const std::size_t nw = theta.windows.size();
  Var X = tape::gather_columns(g, theta.embedding, grads ? &grads->embedding : nullptr, x.tokens);
  std::vector<Var> pooled;
  pooled.reserve(nw);
  for (std::size_t i = 0; i < nw; ++i) {
    Var W = g.input(theta.filters[i], grads ? &grads->filters[i] : nullptr);
    Var b = g.input(theta.biases[i], grads ? &grads->biases[i] : nullptr);
    Var conv = tape::temporal_convolution(g, X, W, b, theta.windows[i]);
    pooled.push_back(tape::max_over_time(g, tape::relu(g, conv)));
  }
  Var h = tape::concat_rows(g, pooled);
  Var dropped = tape::dropout(g, h, theta.keep, rng, train_mode);
  Var W = g.input(theta.dense_w, grads ? &grads->dense_w : nullptr);
  Var b = g.input(theta.dense_b, grads ? &grads->dense_b : nullptr);
  Var logits = tape::affine(g, dropped, W, b);
  return {h, logits, tape::softmax(g, logits)};
}

void check_sentence(const EncodedSentence& x, const BaseModelParams& theta) {
  if (x.tokens.empty()) throw std::invalid_argument("forward_base: empty sentence");
  for (std::size_t w : theta.windows) {
    if (x.tokens.size() < w) {
      throw std::invalid_argument("forward_base: sentence length " + std::to_string(x.tokens.size()) +
                                  " shorter than window " + std::to_string(w));
    }
  }
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

}  // namespace

std::string noise_init_name(NoiseInit m) {
  switch (m) {
    case NoiseInit::identity_gain: return "identity_gain";
    case NoiseInit::true_distribution: return "true_distribution";
    case NoiseInit::random: return "random";
  }
  return "?";
}

NoiseInit parse_noise_init(const std::string& s) {
  if (s == "identity_gain") return NoiseInit::identity_gain;
  if (s == "true_distribution") return NoiseInit::true_distribution;
  if (s == "random") return NoiseInit::random;
  throw std::invalid_argument("unknown noise init '" + s +
                              "' (expected identity_gain|true_distribution|random)");
}

void ModelConfig::validate() const {
  if (embed_dim == 0) throw std::invalid_argument("model.embed_dim must be positive");
  if (t_fixed == 0) throw std::invalid_argument("model.t_fixed must be positive");
  if (windows.empty()) throw std::invalid_argument("model.windows must not be empty");
  for (std::size_t w : windows) {
    if (w == 0 || w > t_fixed) throw std::invalid_argument("model.windows entries must lie in [1, t_fixed]");
  }
  if (feature_maps == 0) throw std::invalid_argument("model.feature_maps must be positive");
  if (num_classes < 2) throw std::invalid_argument("model.num_classes must be at least 2");
  if (!(keep > 0.0 && keep <= 1.0)) throw std::invalid_argument("model.keep must lie in (0, 1]");
  if (gain < 0.0) throw std::invalid_argument("model.gain must be positive");
}

BaseModelParams BaseModelParams::zeros_like() const {
  BaseModelParams z;
  z.embedding = Matrix(embedding.rows(), embedding.cols());
  z.windows = windows;
  for (const auto& f : filters) z.filters.emplace_back(f.rows(), f.cols());
  for (const auto& b : biases) z.biases.emplace_back(b.rows(), b.cols());
  z.dense_w = Matrix(dense_w.rows(), dense_w.cols());
  z.dense_b = Matrix(dense_b.rows(), dense_b.cols());
  z.keep = keep;
  return z;
}

std::vector<std::pair<std::string, Matrix*>> BaseModelParams::blocks() {
  std::vector<std::pair<std::string, Matrix*>> out;
  out.emplace_back("embedding", &embedding);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::string w = std::to_string(windows[i]);
    out.emplace_back("conv" + w + ".filters", &filters[i]);
    out.emplace_back("conv" + w + ".bias", &biases[i]);
  }
  out.emplace_back("dense.w", &dense_w);
  out.emplace_back("dense.b", &dense_b);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> BaseModelParams::blocks() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<BaseModelParams*>(this)->blocks()) out.emplace_back(name, m);
  return out;
}

BaseModelParams init_base_params(Matrix embedding, const ModelConfig& config, Rng& rng) {
  config.validate();
  if (embedding.cols() != config.embed_dim) {
    throw std::invalid_argument("init_base_params: embedding width " +
                                std::to_string(embedding.cols()) + " != embed_dim " +
                                std::to_string(config.embed_dim));
  }
  BaseModelParams p;
  p.embedding = std::move(embedding);
  p.windows = config.windows;
  p.keep = config.keep;
  const std::size_t d = config.embed_dim;
  const std::size_t F = config.feature_maps;
  for (std::size_t w : config.windows) {
    const double s = std::sqrt(6.0 / static_cast<double>(w * d + F));
    p.filters.push_back(uniform_matrix(F, w * d, s, rng));
    p.biases.emplace_back(F, 1);
  }
  const std::size_t in = config.pooled_dim();
  const std::size_t K = config.num_classes;
  p.dense_w = uniform_matrix(K, in, std::sqrt(6.0 / static_cast<double>(in + K)), rng);
  p.dense_b = Matrix(K, 1);
  return p;
}

NoiseLayer init_noise_layer(std::size_t K, NoiseInit mode, double gain,
                            const TransitionMatrix* phi, Rng& rng) {
  if (K < 2) throw std::invalid_argument("init_noise_layer: K must be at least 2");
  NoiseLayer layer;
  layer.init_mode = mode;
  layer.gain = gain > 0.0 ? gain : static_cast<double>(K);
  switch (mode) {
    case NoiseInit::identity_gain:
      layer.psi = Matrix::identity(K, layer.gain);
      break;
    case NoiseInit::true_distribution: {
      if (phi == nullptr) {
        throw std::invalid_argument("init_noise_layer: true_distribution mode needs a transition matrix");
      }
      if (phi->num_classes() != K) throw std::invalid_argument("init_noise_layer: phi has wrong size");
      layer.psi = Matrix(K, K);
      for (std::size_t i = 0; i < layer.psi.size(); ++i) {
        layer.psi[i] = std::log(phi->phi()[i] + ops::kProbFloor);
      }
      break;
    }
    case NoiseInit::random:
      layer.psi = uniform_matrix(K, K, 1.0 / static_cast<double>(K), rng);
      break;
  }
  return layer;
}

Matrix forward_base(const EncodedSentence& x, const BaseModelParams& theta, bool train_mode,
                    Rng* rng) {
  check_sentence(x, theta);
  GradTape g;
  auto graph = record_base(g, x, theta, nullptr, train_mode, rng);
  return g.value(graph.probs);
}

Matrix apply_noise_layer(const Matrix& psi, const Matrix& base_probs) {
  if (base_probs.cols() != 1 || psi.rows() != base_probs.rows() || psi.cols() != base_probs.rows()) {
    throw std::invalid_argument("apply_noise_layer: psi " + shape_str(psi) + " does not match " +
                                shape_str(base_probs));
  }
  return ops::softmax(matmul(psi, base_probs));
}

Matrix forward_noisy(const EncodedSentence& x, const BaseModelParams& theta, const Matrix& psi,
                     bool train_mode, Rng* rng) {
  return apply_noise_layer(psi, forward_base(x, theta, train_mode, rng));
}

Matrix pooled_features(const EncodedSentence& x, const BaseModelParams& theta) {
  check_sentence(x, theta);
  GradTape g;
  return g.value(record_base(g, x, theta, nullptr, false, nullptr).pooled);
}

Matrix base_logits(const EncodedSentence& x, const BaseModelParams& theta) {
  check_sentence(x, theta);
  GradTape g;
  return g.value(record_base(g, x, theta, nullptr, false, nullptr).logits);
}

LossResult loss(std::span<const EncodedSentence* const> batch, const BaseModelParams& theta,
                const Matrix* psi, double lambda, Rng* rng, bool train_mode) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  const std::size_t K = theta.num_classes();
  if (psi != nullptr && (psi->rows() != K || psi->cols() != K)) {
    throw std::invalid_argument("loss: psi must be " + std::to_string(K) + "x" + std::to_string(K));
  }
  LossResult r;
  r.grad_theta = theta.zeros_like();
  if (psi != nullptr) r.grad_psi = Matrix(K, K);
  const double weight = 1.0 / static_cast<double>(batch.size());

  for (const EncodedSentence* x : batch) {
    if (!x->noisy_label) throw std::invalid_argument("loss: example without a noisy label");
    check_sentence(*x, theta);
    GradTape g;
    auto graph = record_base(g, *x, theta, &r.grad_theta, train_mode, rng);
    Var out = graph.probs;
    if (psi != nullptr) {
      Var P = g.input(*psi, &r.grad_psi);
      out = tape::softmax(g, tape::matvec(g, P, graph.probs));
    }
    Var ce = tape::cross_entropy(g, out, *x->noisy_label);
    r.data_term += g.value(ce)[0] * weight;
    g.backward(ce, weight);
  }

  r.value = r.data_term;
  if (psi != nullptr && lambda > 0.0) {
    r.value += 0.5 * lambda * frobenius_sq(*psi);
    for (std::size_t i = 0; i < psi->size(); ++i) r.grad_psi[i] += lambda * (*psi)[i];
  }
  return r;
}

std::size_t predict_clean(const EncodedSentence& x, const BaseModelParams& theta) {
  return ops::argmax(forward_base(x, theta, false, nullptr).data());
}

Matrix marginalize_reference(const TransitionMatrix& phi, const Matrix& base_probs) {
  if (base_probs.cols() != 1 || base_probs.rows() != phi.num_classes()) {
    throw std::invalid_argument("marginalize_reference: probability vector " +
                                shape_str(base_probs) + " does not match K=" +
                                std::to_string(phi.num_classes()));
  }
  return matmul(phi.phi(), base_probs);
}

Matrix softmax_response(const Matrix& psi) {
  if (psi.rows() != psi.cols()) throw std::invalid_argument("softmax_response: psi must be square");
  const std::size_t K = psi.rows();
  Matrix out(K, K);
  for (std::size_t j = 0; j < K; ++j) {
    Matrix col(K, 1);
    for (std::size_t i = 0; i < K; ++i) col[i] = psi(i, j);
    const Matrix s = ops::softmax(col);
    for (std::size_t i = 0; i < K; ++i) out(i, j) = s[i];
  }
  return out;
}

}  // namespace noisecnn
