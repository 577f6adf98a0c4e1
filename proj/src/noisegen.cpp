#include "noisecnn/noisegen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace noisecnn {

namespace {

constexpr double kColumnTol = 1e-9;

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string(what) + ": p must lie in [0, 1]");
  }
}

void require_classes(std::size_t K, const char* what) {
  if (K < 2) throw std::invalid_argument(std::string(what) + ": K must be at least 2");
}

}  // namespace

std::string noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::random: return "random";
    case NoiseKind::custom: return "custom";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "uniform") return NoiseKind::uniform;
  if (s == "random") return NoiseKind::random;
  if (s == "custom") return NoiseKind::custom;
  throw std::invalid_argument("unknown noise kind '" + s + "' (expected uniform|random|custom)");
}

TransitionMatrix::TransitionMatrix(Matrix phi, NoiseKind kind, std::optional<double> p)
    : phi_(std::move(phi)), kind_(kind), p_(p) {
  if (phi_.rows() != phi_.cols() || phi_.rows() == 0) {
    throw std::invalid_argument("TransitionMatrix: must be square, got " + shape_str(phi_));
  }
  for (std::size_t j = 0; j < phi_.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < phi_.rows(); ++i) {
      const double v = phi_(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("TransitionMatrix: entries must lie in [0, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kColumnTol) {
      throw std::invalid_argument("TransitionMatrix: column " + std::to_string(j) +
                                  " sums to " + format_double(sum));
    }
  }
}

double TransitionMatrix::expected_flip_rate() const {
  double keep = 0.0;
  for (std::size_t j = 0; j < num_classes(); ++j) keep += phi_(j, j);
  return 1.0 - keep / static_cast<double>(num_classes());
}

TransitionMatrix build_uniform_noise(std::size_t K, double p) {
  require_probability(p, "build_uniform_noise");
  require_classes(K, "build_uniform_noise");
  const double off = p / static_cast<double>(K);
  Matrix phi(K, K, off);
  for (std::size_t i = 0; i < K; ++i) phi(i, i) = 1.0 - p + off;
  return {std::move(phi), NoiseKind::uniform, p};
}

TransitionMatrix build_random_noise(std::size_t K, double p, Rng& rng) {
  require_probability(p, "build_random_noise");
  require_classes(K, "build_random_noise");
  Matrix phi(K, K);
  std::vector<double> draws(K - 1);
  for (std::size_t j = 0; j < K; ++j) {
    double total = 0.0;
    for (auto& e : draws) {
      e = rng.exponential();
      total += e;
    }
    std::size_t k = 0;
    for (std::size_t i = 0; i < K; ++i) {
      if (i == j) continue;
      phi(i, j) = p * (draws[k++] / total);
    }
    phi(j, j) = 1.0 - p;
  }
  return {std::move(phi), NoiseKind::random, p};
}

TransitionMatrix build_custom_noise(const Matrix& weights, std::vector<std::string>* warnings) {
  if (weights.rows() != weights.cols()) {
    throw std::invalid_argument("build_custom_noise: matrix must be square");
  }
  for (double v : weights.data()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("build_custom_noise: entries must be finite and non-negative");
    }
  }
  if (warnings != nullptr) {
    for (std::size_t j = 0; j < weights.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < weights.rows(); ++i) sum += weights(i, j);
      if (sum < 0.99 || sum > 1.01) {
        warnings->push_back("column " + std::to_string(j) + " sums to " + format_double(sum) +
                            "; normalized");
      }
    }
  }
  return {column_normalize(weights), NoiseKind::custom};
}

TransitionMatrix build_class_dependent_noise(std::span<const double> keep_rates) {
  const std::size_t K = keep_rates.size();
  require_classes(K, "build_class_dependent_noise");
  Matrix w(K, K);
  for (std::size_t j = 0; j < K; ++j) {
    require_probability(keep_rates[j], "build_class_dependent_noise");
    const double spread = (1.0 - keep_rates[j]) / static_cast<double>(K - 1);
    for (std::size_t i = 0; i < K; ++i) w(i, j) = i == j ? keep_rates[j] : spread;
  }
  return {std::move(w), NoiseKind::custom};
}

std::vector<std::size_t> sample_noisy_labels(std::span<const std::size_t> clean,
                                             const TransitionMatrix& phi, Rng& rng) {
  const std::size_t K = phi.num_classes();
  const Matrix& m = phi.phi();
  std::vector<std::size_t> noisy(clean.size());
  for (std::size_t n = 0; n < clean.size(); ++n) {
    const std::size_t y = clean[n];
    if (y >= K) throw std::invalid_argument("sample_noisy_labels: label outside [0, K)");
    const double u = rng.uniform();
    double cdf = 0.0;
    std::size_t pick = K;
    for (std::size_t i = 0; i < K; ++i) {
      cdf += m(i, y);
      if (u < cdf) {
        pick = i;
        break;
      }
    }
    // Rounding can leave the cumulative sum a hair below 1; fall back to the
    // last class with non-zero mass.
    if (pick == K) {
      pick = K - 1;
      while (pick > 0 && m(pick, y) == 0.0) --pick;
    }
    noisy[n] = pick;
  }
  return noisy;
}

LabeledDataset corrupt_labels(const LabeledDataset& dataset, const TransitionMatrix& phi, Rng& rng) {
  if (dataset.split == Split::test) {
    throw std::invalid_argument("corrupt_labels: test labels are never corrupted");
  }
  if (dataset.num_classes != phi.num_classes()) {
    throw std::invalid_argument("corrupt_labels: dataset has " +
                                std::to_string(dataset.num_classes) + " classes, noise matrix " +
                                std::to_string(phi.num_classes()));
  }
  std::vector<std::size_t> clean;
  clean.reserve(dataset.size());
  for (const auto& e : dataset.examples) clean.push_back(e.label);
  const auto noisy = sample_noisy_labels(clean, phi, rng);
  LabeledDataset out = dataset;
  for (std::size_t i = 0; i < out.examples.size(); ++i) out.examples[i].noisy_label = noisy[i];
  return out;
}

double flip_fraction(std::span<const std::size_t> clean, std::span<const std::size_t> noisy) {
  if (clean.size() != noisy.size() || clean.empty()) {
    throw std::invalid_argument("flip_fraction: label vectors must be non-empty and aligned");
  }
  std::size_t flips = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) flips += clean[i] != noisy[i];
  return static_cast<double>(flips) / static_cast<double>(clean.size());
}

Matrix column_normalize(const Matrix& m) {
  Matrix out = m;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) sum += m(i, j);
    if (sum == 0.0) {
      throw std::invalid_argument("column_normalize: column " + std::to_string(j) + " sums to zero");
    }
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = m(i, j) / sum;
  }
  return out;
}

double pearson(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "pearson");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least two entries");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw std::invalid_argument("pearson: constant matrix");
  return sab / std::sqrt(saa * sbb);
}

double frobenius_norm(const Matrix& m) { return std::sqrt(frobenius_sq(m)); }

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(rows + 1) +
                                 ": bad number '" + cell + "'");
      }
      ++n;
    }
    if (rows == 0) cols = n;
    if (n != cols) throw std::runtime_error(path.string() + ": ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) throw std::runtime_error(path.string() + ": empty matrix");
  return Matrix(rows, cols, std::move(values));
}

TransitionMatrix load_transition_csv(const std::filesystem::path& path) {
  Matrix m = read_matrix_csv(path);
  if (m.rows() != m.cols()) throw std::runtime_error(path.string() + ": matrix must be square");
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) sum += m(i, j);
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::runtime_error(path.string() + ": column " + std::to_string(j) +
                               " is not stochastic (sum " + format_double(sum) + ")");
    }
  }
  // Re-normalize so the stricter in-memory tolerance holds after decimal round-off.
  return {column_normalize(m), NoiseKind::custom};
}

}  // namespace noisecnn
