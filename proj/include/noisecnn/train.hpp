#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "noisecnn/model.hpp"
#include "noisecnn/optim.hpp"
#include "noisecnn/textpipe.hpp"

namespace noisecnn {

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t batch_size = 50;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  double lambda = 0.01;  // L2 weight on the noise layer only
  std::uint64_t shuffle_seed = 0;
  std::uint64_t dropout_seed = 0;

  void validate() const;
};

struct TrainedModel {
  BaseModelParams theta;
  std::optional<NoiseLayer> noise;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_acc = 0.0;                  // against noisy dev labels
  std::optional<double> test_acc;        // clean test labels, base head only
  std::optional<double> psi_fro;
};

struct RunRecord {
  std::vector<EpochStats> epochs;
  std::optional<std::size_t> best_epoch;  // 1-based
  std::optional<Matrix> final_psi;        // psi of the returned snapshot
};

struct TrainResult {
  TrainedModel model;
  RunRecord record;
};

/// Minibatch training on noisy labels with early stopping on noisy-dev
/// accuracy. Returns the best snapshot. `test`, when given, is scored with
/// the clean head after every epoch for the record only.
TrainResult train(const LabeledDataset& train_set, const LabeledDataset& dev_set,
                  const LabeledDataset* test_set, TrainedModel init, const TrainConfig& config);

/// Accuracy of the head used for early stopping: the noise layer when
/// present, otherwise the base model, scored against noisy labels (falling
/// back to clean labels where none are attached).
double noisy_accuracy(const LabeledDataset& data, const TrainedModel& model);

/// Fraction of examples whose predict_clean matches the clean label.
double evaluate_clean(const LabeledDataset& test_set, const BaseModelParams& theta);

enum class FeatureKind { pooled, logits };
FeatureKind parse_feature_kind(const std::string& s);

/// One row per example in dataset order, evaluation mode.
Matrix extract_features(const LabeledDataset& data, const BaseModelParams& theta,
                        FeatureKind kind = FeatureKind::pooled);

struct ProbeConfig {
  double C = 1.0;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
};

/// One-vs-rest linear classifier over standardized features.
struct LinearProbe {
  Matrix weights;  // K x D
  Matrix bias;     // K x 1
  std::vector<double> mean;
  std::vector<double> scale;

  std::size_t predict(std::span<const double> features) const;
};

/// Hinge-loss subgradient descent per class with objective
/// (1/(2 C n)) ||w||^2 + mean hinge, shuffled per-sample updates and step
/// 1/(1+t) where t counts updates. The bias is not penalized.
LinearProbe fit_linear_probe(const Matrix& features, std::span<const std::size_t> targets,
                             std::size_t num_classes, const ProbeConfig& config);

double probe_accuracy(const LinearProbe& probe, const Matrix& features,
                      std::span<const std::size_t> labels);

/// Fits on the training features and scores on held-out test features.
double linear_probe(const Matrix& train_features, std::span<const std::size_t> train_targets,
                    const Matrix& test_features, std::span<const std::size_t> test_labels,
                    std::size_t num_classes, const ProbeConfig& config);

/// JSON-lines, one object per epoch: epoch, train_loss, dev_acc, test_acc, psi_fro.
std::string run_record_jsonl(const RunRecord& record);

}  // namespace noisecnn
