#include "noisecnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "noisecnn/noisegen.hpp"
#include "noisecnn/ops.hpp"

namespace noisecnn {

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("train.batch_size must be at least 1");
  if (patience == 0) throw std::invalid_argument("train.patience must be at least 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("train.lambda must be non-negative");
  if (optimizer.kind == OptimizerKind::adadelta && !(optimizer.rho > 0.0 && optimizer.rho < 1.0)) {
    throw std::invalid_argument("train.rho must lie in (0, 1)");
  }
  if (optimizer.kind == OptimizerKind::sgd && !(optimizer.lr > 0.0)) {
    throw std::invalid_argument("train.lr must be positive");
  }
}

namespace {

double accuracy_of(std::size_t correct, std::size_t total) {
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

double noisy_accuracy(const LabeledDataset& data, const TrainedModel& model) {
  if (data.examples.empty()) throw std::invalid_argument("noisy_accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& x : data.examples) {
    const std::size_t target = x.noisy_label.value_or(x.label);
    const Matrix out = model.noise ? forward_noisy(x, model.theta, model.noise->psi, false, nullptr)
                                   : forward_base(x, model.theta, false, nullptr);
    correct += ops::argmax(out.data()) == target;
  }
  return accuracy_of(correct, data.size());
}

double evaluate_clean(const LabeledDataset& test_set, const BaseModelParams& theta) {
  if (test_set.examples.empty()) throw std::invalid_argument("evaluate_clean: empty dataset");
  std::size_t correct = 0;
  for (const auto& x : test_set.examples) correct += predict_clean(x, theta) == x.label;
  return accuracy_of(correct, test_set.size());
}

TrainResult train(const LabeledDataset& train_set, const LabeledDataset& dev_set,
                  const LabeledDataset* test_set, TrainedModel init, const TrainConfig& config) {
  config.validate();
  if (train_set.examples.empty()) throw std::invalid_argument("train: empty training set");
  if (!train_set.has_noisy_labels()) throw std::invalid_argument("train: training set lacks noisy labels");
  if (dev_set.examples.empty()) throw std::invalid_argument("train: empty dev set");

  TrainResult result{init, {}};
  TrainedModel current = std::move(init);
  Optimizer optimizer(config.optimizer);
  Rng shuffle_rng(config.shuffle_seed);
  Rng dropout_rng(config.dropout_seed);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const EncodedSentence*> batch;
  batch.reserve(config.batch_size);

  std::optional<double> best_dev;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set.examples[order[i]]);

      Matrix* psi = current.noise ? &current.noise->psi : nullptr;
      LossResult r = loss(batch, current.theta, psi, config.lambda, &dropout_rng);
      loss_sum += r.value * static_cast<double>(batch.size());

      auto params = current.theta.blocks();
      auto grads = r.grad_theta.blocks();
      for (std::size_t b = 0; b < params.size(); ++b) {
        optimizer.step(params[b].first, *params[b].second, *grads[b].second);
      }
      if (psi != nullptr) optimizer.step("noise.psi", *psi, r.grad_psi);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.dev_acc = noisy_accuracy(dev_set, current);
    if (test_set != nullptr) stats.test_acc = evaluate_clean(*test_set, current.theta);
    if (current.noise) stats.psi_fro = frobenius_norm(current.noise->psi);
    result.record.epochs.push_back(stats);

    if (!best_dev || stats.dev_acc > *best_dev) {
      best_dev = stats.dev_acc;
      result.record.best_epoch = epoch;
      result.model = current;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (result.model.noise) result.record.final_psi = result.model.noise->psi;
  return result;
}

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "pooled") return FeatureKind::pooled;
  if (s == "logits") return FeatureKind::logits;
  throw std::invalid_argument("unknown feature kind '" + s + "' (expected pooled|logits)");
}

Matrix extract_features(const LabeledDataset& data, const BaseModelParams& theta, FeatureKind kind) {
  const std::size_t dim = kind == FeatureKind::pooled ? theta.dense_w.cols() : theta.num_classes();
  Matrix out(data.size(), dim);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Matrix f = kind == FeatureKind::pooled ? pooled_features(data.examples[n], theta)
                                                 : base_logits(data.examples[n], theta);
    std::copy(f.data().begin(), f.data().end(), out.row(n).begin());
  }
  return out;
}

std::size_t LinearProbe::predict(std::span<const double> features) const {
  const std::size_t K = weights.rows();
  const std::size_t D = weights.cols();
  if (features.size() != D) throw std::invalid_argument("LinearProbe::predict: feature width mismatch");
  std::vector<double> scores(K);
  for (std::size_t k = 0; k < K; ++k) {
    double s = bias[k];
    const auto w = weights.row(k);
    for (std::size_t j = 0; j < D; ++j) s += w[j] * (features[j] - mean[j]) * scale[j];
    scores[k] = s;
  }
  return ops::argmax(scores);
}

LinearProbe fit_linear_probe(const Matrix& features, std::span<const std::size_t> targets,
                             std::size_t num_classes, const ProbeConfig& config) {
  const std::size_t n = features.rows();
  const std::size_t D = features.cols();
  if (n == 0 || n != targets.size()) {
    throw std::invalid_argument("linear_probe: features and targets must be non-empty and aligned");
  }
  if (!(config.C > 0.0)) throw std::invalid_argument("linear_probe: C must be positive");
  for (std::size_t t : targets) {
    if (t >= num_classes) throw std::invalid_argument("linear_probe: target outside [0, K)");
  }
  if (std::all_of(targets.begin(), targets.end(), [&](std::size_t t) { return t == targets[0]; })) {
    throw std::invalid_argument("linear_probe: targets contain a single class");
  }

  LinearProbe probe;
  probe.mean.assign(D, 0.0);
  probe.scale.assign(D, 1.0);
  for (std::size_t j = 0; j < D; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += features(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (features(i, j) - m) * (features(i, j) - m);
    v /= static_cast<double>(n);
    probe.mean[j] = m;
    probe.scale[j] = v > 0.0 ? 1.0 / std::sqrt(v) : 0.0;
  }
  Matrix z(n, D);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < D; ++j) z(i, j) = (features(i, j) - probe.mean[j]) * probe.scale[j];

  probe.weights = Matrix(num_classes, D);
  probe.bias = Matrix(num_classes, 1);
  const double reg = 1.0 / (config.C * static_cast<double>(n));
  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const double lr = 1.0 / (1.0 + static_cast<double>(t++));
      const auto x = z.row(i);
      for (std::size_t k = 0; k < num_classes; ++k) {
        auto w = probe.weights.row(k);
        const double y = targets[i] == k ? 1.0 : -1.0;
        double s = probe.bias[k];
        for (std::size_t j = 0; j < D; ++j) s += w[j] * x[j];
        const bool violated = y * s < 1.0;
        for (std::size_t j = 0; j < D; ++j) {
          w[j] -= lr * (reg * w[j] - (violated ? y * x[j] : 0.0));
        }
        if (violated) probe.bias[k] += lr * y;
      }
    }
  }
  return probe;
}

double probe_accuracy(const LinearProbe& probe, const Matrix& features,
                      std::span<const std::size_t> labels) {
  if (features.rows() == 0 || features.rows() != labels.size()) {
    throw std::invalid_argument("probe_accuracy: features and labels must be non-empty and aligned");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.rows(); ++i) correct += probe.predict(features.row(i)) == labels[i];
  return accuracy_of(correct, labels.size());
}

double linear_probe(const Matrix& train_features, std::span<const std::size_t> train_targets,
                    const Matrix& test_features, std::span<const std::size_t> test_labels,
                    std::size_t num_classes, const ProbeConfig& config) {
  const auto probe = fit_linear_probe(train_features, train_targets, num_classes, config);
  return probe_accuracy(probe, test_features, test_labels);
}

std::string run_record_jsonl(const RunRecord& record) {
  std::ostringstream out;
  for (const auto& e : record.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["dev_acc"] = e.dev_acc;
    j["test_acc"] = e.test_acc ? nlohmann::ordered_json(*e.test_acc) : nlohmann::ordered_json();
    j["psi_fro"] = e.psi_fro ? nlohmann::ordered_json(*e.psi_fro) : nlohmann::ordered_json();
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace noisecnn
