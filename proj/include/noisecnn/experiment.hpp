#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "noisecnn/checkpoint.hpp"
#include "noisecnn/config.hpp"
#include "noisecnn/model.hpp"
#include "noisecnn/noisegen.hpp"
#include "noisecnn/textpipe.hpp"
#include "noisecnn/train.hpp"

namespace noisecnn {

/// wonm: base model alone. The others stack a noise layer:
/// nmworegu (identity*gain, lambda = 0), nmwregu (identity*gain, lambda > 0),
/// tdwregu (log of the true transition matrix, lambda > 0),
/// randwregu (random init, lambda > 0).
enum class Variant { wonm, nmworegu, nmwregu, tdwregu, randwregu };
std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);

struct NoiseSpec {
  std::optional<NoiseKind> kind;  // nullopt: labels left clean
  double p = 0.0;
  std::optional<std::filesystem::path> matrix;  // custom kind, or true matrix for pre-corrupted files
  std::vector<double> keep_rates;               // custom kind without a matrix file
};

struct DataSpec {
  bool synthetic = true;
  SyntheticSpec synth;
  std::filesystem::path train, dev, test;
  bool pre_corrupted = false;  // train/dev are clean<TAB>noisy<TAB>text
  std::size_t min_count = 1;
  std::optional<std::filesystem::path> embeddings;
};

struct ExperimentConfig {
  Variant variant = Variant::nmwregu;
  std::uint64_t seed = 1;
  std::size_t repeats = 1;
  DataSpec data;
  NoiseSpec noise;
  ModelConfig model;  // t_fixed 0 = 95th percentile of train lengths
  TrainConfig train;
  ProbeConfig probe;

  /// Parses and validates; errors name the offending section.key.
  static ExperimentConfig from_ini(const IniFile& ini);
  /// Every effective setting, suitable for re-running.
  IniFile to_ini() const;
  void validate() const;
};

struct PreparedData {
  Vocab vocab;
  LabelMap labels;
  RawDataset raw_train, raw_dev, raw_test;
  LabeledDataset train, dev, test;
  std::optional<TransitionMatrix> phi;
  std::size_t t_fixed = 0;
};

/// Loads or generates the splits, builds the vocabulary on the training
/// split, and corrupts train/dev labels (test is never corrupted).
PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t run_seed);

struct RunOutput {
  Checkpoint checkpoint;
  RunRecord record;
  double test_acc = 0.0;
  double realized_flip = 0.0;  // on the training split
};

/// One full run for `run_seed`. All randomness comes from named sub-streams of
/// that seed (synthetic, noise_matrix, corruption, init, noise_init, shuffle,
/// dropout).
RunOutput run_experiment(const ExperimentConfig& config, std::uint64_t run_seed,
                         const PreparedData* data = nullptr);

/// Seed of repeat r (r = 0 uses the master seed itself).
std::uint64_t repeat_seed(std::uint64_t master, std::size_t r);

/// Rows: clean label, noisy label, then the feature vector.
void write_features_csv(const std::filesystem::path& path, const LabeledDataset& data,
                        const Matrix& features);

}  // namespace noisecnn
