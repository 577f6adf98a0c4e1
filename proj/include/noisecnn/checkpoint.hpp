#pragma once

#include <filesystem>
#include <string>

#include "noisecnn/model.hpp"
#include "noisecnn/textpipe.hpp"
#include "noisecnn/train.hpp"

namespace noisecnn {

/// Everything needed to score new text: architecture, vocabulary, class names
/// and parameters.
struct Checkpoint {
  std::string variant;
  ModelConfig config;
  Vocab vocab;
  LabelMap labels;
  TrainedModel model;
};

inline constexpr const char* kCheckpointMagic = "NOISECNN-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

/// Layout:
///   NOISECNN-CHECKPOINT 1
///   config <n>   then n "key=value" lines
///   vocab <n>    then n tokens, one per line
///   labels <n>   then n class names, one per line
///   blocks <m>   then per block "name rows cols\n" + rows*cols little-endian
///                float64 values + "\n". The noise layer is block "noise.psi".
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace noisecnn
