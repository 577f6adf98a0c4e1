#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "noisecnn/matrix.hpp"
#include "noisecnn/rng.hpp"

namespace noisecnn {

/// Token to index map. Index 0 is PAD and 1 is UNK; frozen once built.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocab();
  /// Rebuilds a vocabulary from its full token list (PAD and UNK included).
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t index(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(std::string_view token) const;

 private:
  friend Vocab build_vocab(const std::vector<std::vector<std::string>>&, std::size_t);
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Class names in first-seen order.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> names);

  /// Index of `name`, adding it when `grow` is set.
  std::size_t intern(const std::string& name, bool grow = true);
  std::optional<std::size_t> find(const std::string& name) const;
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Split { train, dev, test };
std::string_view split_name(Split s);

struct RawExample {
  std::size_t label = 0;
  std::optional<std::size_t> noisy_label;
  std::string text;
};

struct RawDataset {
  std::vector<RawExample> examples;
  LabelMap labels;
};

struct EncodedSentence {
  std::vector<std::size_t> tokens;
  std::size_t label = 0;
  std::optional<std::size_t> noisy_label;
};

struct LabeledDataset {
  std::vector<EncodedSentence> examples;
  std::size_t num_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return examples.size(); }
  bool has_noisy_labels() const;
};

/// Lowercases, splits on whitespace and strips non-alphanumeric characters from
/// both ends of every token. Tokens that end up empty are dropped.
std::vector<std::string> tokenize(std::string_view text);

/// Tokens ordered by descending frequency then lexicographically; tokens seen
/// fewer than `min_count` times map to UNK.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count = 1);

EncodedSentence encode(std::string_view text, const Vocab& vocab, std::size_t t_fixed);

/// Reads "label<TAB>text" lines. Labels are numbered in first-seen order,
/// continuing from `labels` when one is supplied. With `grow_labels` false an
/// unknown label is an error.
RawDataset load_tsv(const std::filesystem::path& path, LabelMap labels = {},
                    bool grow_labels = true);
/// Reads "clean<TAB>noisy<TAB>text" lines.
RawDataset load_corrupted_tsv(const std::filesystem::path& path, LabelMap labels = {},
                              bool grow_labels = true);
/// Writes two columns, or three when every example has a noisy label.
void write_tsv(const std::filesystem::path& path, const RawDataset& data);

LabeledDataset encode_dataset(const RawDataset& raw, const Vocab& vocab, std::size_t t_fixed,
                              Split split, std::size_t num_classes);

/// Token count at the given quantile of the texts (nearest rank), at least 1.
std::size_t quantile_length(const std::vector<RawExample>& examples, double q = 0.95);

/// |V| x d table. Non-PAD rows start Uniform(-0.25, 0.25); rows for tokens in
/// the pretrained text file ("token v1 ... vd", optional "count dim" header)
/// are copied from it. The PAD row is zero.
Matrix init_embeddings(const Vocab& vocab, std::size_t d,
                       const std::optional<std::filesystem::path>& pretrained, Rng& rng);

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t n_train = 4000;
  std::size_t n_dev = 500;
  std::size_t n_test = 500;
  std::size_t max_len = 20;
  std::size_t vocab_size = 2000;
  std::size_t signal_tokens_per_class = 50;
  double filler_rate = 0.85;  // chance that a token position holds a filler word
};

struct SyntheticCorpus {
  RawDataset train;
  RawDataset dev;
  RawDataset test;
};

/// Sentences of filler words plus at least one word drawn from a per-class
/// indicative pool; the class depends only on the indicative words. Splits
/// contain no duplicate sentences across each other.
SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec, Rng& rng);

}  // namespace noisecnn
