#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisecnn/matrix.hpp"
#include "noisecnn/rng.hpp"
#include "noisecnn/textpipe.hpp"

namespace noisecnn {

enum class NoiseKind { uniform, random, custom };
std::string noise_kind_name(NoiseKind k);
NoiseKind parse_noise_kind(const std::string& s);

/// Column-stochastic label-noise distribution: phi(i, j) = P(noisy = i | clean = j).
class TransitionMatrix {
 public:
  TransitionMatrix(Matrix phi, NoiseKind kind, std::optional<double> p = std::nullopt);

  std::size_t num_classes() const { return phi_.rows(); }
  const Matrix& phi() const { return phi_; }
  NoiseKind kind() const { return kind_; }
  std::optional<double> flip_parameter() const { return p_; }

  /// Expected fraction of labels that change, assuming balanced classes.
  double expected_flip_rate() const;

 private:
  Matrix phi_;
  NoiseKind kind_;
  std::optional<double> p_;
};

/// (1 - p) I + (p / K) 11^T. The realized error rate is p (1 - 1/K), not p.
TransitionMatrix build_uniform_noise(std::size_t K, double p);

/// (1 - p) I + p D where each column of D has a zero diagonal and off-diagonal
/// entries drawn uniformly from the unit simplex (normalized exponentials).
TransitionMatrix build_random_noise(std::size_t K, double p, Rng& rng);

/// Column-normalizes arbitrary non-negative weights. Column sums outside
/// [0.99, 1.01] are reported through `warnings` (if given) before normalizing.
TransitionMatrix build_custom_noise(const Matrix& weights,
                                    std::vector<std::string>* warnings = nullptr);

/// Per-class keep rates on the diagonal with the residue spread evenly over
/// the other classes.
TransitionMatrix build_class_dependent_noise(std::span<const double> keep_rates);

/// One uniform draw per label, inverted through the CDF of column phi[:, y].
std::vector<std::size_t> sample_noisy_labels(std::span<const std::size_t> clean,
                                             const TransitionMatrix& phi, Rng& rng);

/// Copies `dataset` with freshly drawn noisy labels. Test splits are refused.
LabeledDataset corrupt_labels(const LabeledDataset& dataset, const TransitionMatrix& phi, Rng& rng);

double flip_fraction(std::span<const std::size_t> clean, std::span<const std::size_t> noisy);

Matrix column_normalize(const Matrix& m);
double pearson(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);

/// CSV with K rows of K values; loading checks column-stochasticity (1e-6).
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);
TransitionMatrix load_transition_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace noisecnn
