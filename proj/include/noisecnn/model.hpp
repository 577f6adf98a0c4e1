#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisecnn/matrix.hpp"
#include "noisecnn/noisegen.hpp"
#include "noisecnn/rng.hpp"
#include "noisecnn/textpipe.hpp"

namespace noisecnn {

enum class NoiseInit { identity_gain, true_distribution, random };
std::string noise_init_name(NoiseInit m);
NoiseInit parse_noise_init(const std::string& s);

struct ModelConfig {
  std::size_t embed_dim = 32;
  std::size_t t_fixed = 20;
  std::vector<std::size_t> windows{3, 4, 5};
  std::size_t feature_maps = 100;
  std::size_t num_classes = 2;
  double keep = 0.5;  // dropout keep probability
  bool noise_layer = true;
  NoiseInit init_mode = NoiseInit::identity_gain;
  double gain = 0.0;  // 0 means K

  double effective_gain() const { return gain > 0.0 ? gain : static_cast<double>(num_classes); }
  std::size_t pooled_dim() const { return feature_maps * windows.size(); }
  void validate() const;
};

/// Embedding table, one filter bank per window, and the final dense layer.
struct BaseModelParams {
  Matrix embedding;               // |V| x d
  std::vector<std::size_t> windows;
  std::vector<Matrix> filters;    // F x (w*d) per window
  std::vector<Matrix> biases;     // F x 1 per window
  Matrix dense_w;                 // K x (F * #windows)
  Matrix dense_b;                 // K x 1
  double keep = 0.5;

  std::size_t num_classes() const { return dense_w.rows(); }
  std::size_t embed_dim() const { return embedding.cols(); }

  /// Zero-valued parameters of identical shape.
  BaseModelParams zeros_like() const;
  /// Named views in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> blocks();
  std::vector<std::pair<std::string, const Matrix*>> blocks() const;
};

struct NoiseLayer {
  Matrix psi;  // K x K
  NoiseInit init_mode = NoiseInit::identity_gain;
  double gain = 0.0;
};

/// Filters and dense weights ~ Uniform(-s, s), s = sqrt(6 / (fan_in + fan_out));
/// biases zero. `embedding` supplies the |V| x d table.
BaseModelParams init_base_params(Matrix embedding, const ModelConfig& config, Rng& rng);

/// identity_gain: gain * I. true_distribution: log(phi + 1e-12) elementwise, so
/// softmax(psi e_j) recovers column j of phi. random: Uniform(-1/K, 1/K).
NoiseLayer init_noise_layer(std::size_t K, NoiseInit mode, double gain,
                            const TransitionMatrix* phi, Rng& rng);

/// Base classifier p(y | x). `rng` feeds dropout and is only used in train mode.
Matrix forward_base(const EncodedSentence& x, const BaseModelParams& theta, bool train_mode,
                    Rng* rng);

/// softmax(psi * base_probs): the noise layer on its own.
Matrix apply_noise_layer(const Matrix& psi, const Matrix& base_probs);

/// softmax(psi * forward_base(x)).
Matrix forward_noisy(const EncodedSentence& x, const BaseModelParams& theta, const Matrix& psi,
                     bool train_mode, Rng* rng);

/// Pooled penultimate activations (evaluation mode).
Matrix pooled_features(const EncodedSentence& x, const BaseModelParams& theta);
/// Pre-softmax outputs of the base model (evaluation mode).
Matrix base_logits(const EncodedSentence& x, const BaseModelParams& theta);

struct LossResult {
  double value = 0.0;
  double data_term = 0.0;  // mean cross-entropy against noisy labels
  BaseModelParams grad_theta;
  Matrix grad_psi;  // empty without a noise layer
};

/// Mean over the batch of -log[softmax(psi p(y|x))]_{noisy} plus
/// (lambda/2) ||psi||_F^2. Without `psi` the base output is scored directly and
/// lambda is ignored. Dropout is active; per-example gradients are summed in
/// batch order.
LossResult loss(std::span<const EncodedSentence* const> batch, const BaseModelParams& theta,
                const Matrix* psi, double lambda, Rng* rng, bool train_mode = true);

/// Argmax of the base model in evaluation mode; the noise layer is never used.
std::size_t predict_clean(const EncodedSentence& x, const BaseModelParams& theta);

/// phi * base_probs: exact class-conditional marginalization over clean labels.
Matrix marginalize_reference(const TransitionMatrix& phi, const Matrix& base_probs);

/// Columns softmax(psi e_j): the noisy-label distribution the layer produces
/// for a confident clean prediction of class j.
Matrix softmax_response(const Matrix& psi);

}  // namespace noisecnn
