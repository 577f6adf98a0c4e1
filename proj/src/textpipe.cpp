#include "noisecnn/textpipe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace noisecnn {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::runtime_error line_error(const std::filesystem::path& path, std::size_t line,
                              const std::string& msg) {
  return std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + msg);
}

template <typename OnLine>
void for_each_line(const std::filesystem::path& path, OnLine on_line) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    on_line(line, lineno);
  }
}

std::size_t lookup_label(LabelMap& labels, const std::string& name, bool grow,
                         const std::filesystem::path& path, std::size_t lineno) {
  if (name.empty()) throw line_error(path, lineno, "empty label");
  if (!grow) {
    auto idx = labels.find(name);
    if (!idx) throw line_error(path, lineno, "unknown label '" + name + "'");
    return *idx;
  }
  return labels.intern(name);
}

}  // namespace

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2) throw std::invalid_argument("Vocab::from_tokens: PAD and UNK required");
  Vocab v;
  for (std::size_t i = 2; i < tokens.size(); ++i) v.add(std::move(tokens[i]));
  return v;
}

void Vocab::add(std::string token) {
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (!inserted) throw std::invalid_argument("Vocab: duplicate token '" + token + "'");
  tokens_.push_back(std::move(token));
}

std::size_t Vocab::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

LabelMap::LabelMap(std::vector<std::string> names) {
  for (auto& n : names) intern(n);
}

std::size_t LabelMap::intern(const std::string& name, bool grow) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  if (!grow) throw std::invalid_argument("unknown label '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(name);
  return names_.size() - 1;
}

std::optional<std::size_t> LabelMap::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

bool LabeledDataset::has_noisy_labels() const {
  return !examples.empty() &&
         std::all_of(examples.begin(), examples.end(),
                     [](const EncodedSentence& e) { return e.noisy_label.has_value(); });
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && !is_word_char(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && !is_word_char(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& stream : corpus)
    for (const auto& tok : stream) ++counts[tok];

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab v;
  for (auto& [tok, n] : ranked) {
    if (n < min_count) continue;
    if (v.contains(tok)) continue;
    v.add(tok);
  }
  return v;
}

EncodedSentence encode(std::string_view text, const Vocab& vocab, std::size_t t_fixed) {
  if (t_fixed == 0) throw std::invalid_argument("encode: T_fixed must be at least 1");
  EncodedSentence s;
  s.tokens.assign(t_fixed, Vocab::kPad);
  const auto toks = tokenize(text);
  const std::size_t n = std::min(toks.size(), t_fixed);
  for (std::size_t i = 0; i < n; ++i) s.tokens[i] = vocab.index(toks[i]);
  return s;
}

RawDataset load_tsv(const std::filesystem::path& path, LabelMap labels, bool grow_labels) {
  RawDataset ds;
  ds.labels = std::move(labels);
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw line_error(path, lineno, "expected 'label<TAB>text'");
    RawExample ex;
    ex.label = lookup_label(ds.labels, line.substr(0, tab), grow_labels, path, lineno);
    ex.text = line.substr(tab + 1);
    ds.examples.push_back(std::move(ex));
  });
  return ds;
}

RawDataset load_corrupted_tsv(const std::filesystem::path& path, LabelMap labels,
                              bool grow_labels) {
  RawDataset ds;
  ds.labels = std::move(labels);
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw line_error(path, lineno, "expected 'clean_label<TAB>noisy_label<TAB>text'");
    }
    RawExample ex;
    ex.label = lookup_label(ds.labels, line.substr(0, t1), grow_labels, path, lineno);
    ex.noisy_label = lookup_label(ds.labels, line.substr(t1 + 1, t2 - t1 - 1), grow_labels, path, lineno);
    ex.text = line.substr(t2 + 1);
    ds.examples.push_back(std::move(ex));
  });
  return ds;
}

void write_tsv(const std::filesystem::path& path, const RawDataset& data) {
  const bool three = !data.examples.empty() &&
                     std::all_of(data.examples.begin(), data.examples.end(),
                                 [](const RawExample& e) { return e.noisy_label.has_value(); });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& ex : data.examples) {
    out << data.labels.name(ex.label) << '\t';
    if (three) out << data.labels.name(*ex.noisy_label) << '\t';
    out << ex.text << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

LabeledDataset encode_dataset(const RawDataset& raw, const Vocab& vocab, std::size_t t_fixed,
                              Split split, std::size_t num_classes) {
  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  ds.examples.reserve(raw.examples.size());
  for (const auto& ex : raw.examples) {
    if (ex.label >= num_classes || (ex.noisy_label && *ex.noisy_label >= num_classes)) {
      throw std::invalid_argument("encode_dataset: label outside [0, K)");
    }
    EncodedSentence s = encode(ex.text, vocab, t_fixed);
    s.label = ex.label;
    if (split != Split::test) s.noisy_label = ex.noisy_label;
    ds.examples.push_back(std::move(s));
  }
  return ds;
}

std::size_t quantile_length(const std::vector<RawExample>& examples, double q) {
  if (examples.empty()) return 1;
  std::vector<std::size_t> lens;
  lens.reserve(examples.size());
  for (const auto& ex : examples) lens.push_back(tokenize(ex.text).size());
  std::sort(lens.begin(), lens.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(lens.size())));
  const std::size_t idx = std::min(lens.size() - 1, rank == 0 ? 0 : rank - 1);
  return std::max<std::size_t>(1, lens[idx]);
}

Matrix init_embeddings(const Vocab& vocab, std::size_t d,
                       const std::optional<std::filesystem::path>& pretrained, Rng& rng) {
  if (d == 0) throw std::invalid_argument("init_embeddings: d must be positive");
  Matrix E(vocab.size(), d);
  for (std::size_t r = 1; r < vocab.size(); ++r)
    for (std::size_t c = 0; c < d; ++c) E(r, c) = rng.uniform(-0.25, 0.25);

  if (pretrained) {
    bool first = true;
    for_each_line(*pretrained, [&](const std::string& line, std::size_t lineno) {
      std::istringstream ss(line);
      std::string token;
      ss >> token;
      std::vector<double> values;
      std::string field;
      while (ss >> field) {
        try {
          std::size_t used = 0;
          values.push_back(std::stod(field, &used));
          if (used != field.size()) throw std::invalid_argument(field);
        } catch (const std::exception&) {
          throw line_error(*pretrained, lineno, "bad number '" + field + "'");
        }
      }
      const bool header = first && values.size() == 1 &&
                          token.find_first_not_of("0123456789") == std::string::npos;
      first = false;
      if (header) return;
      if (values.size() != d) {
        throw line_error(*pretrained, lineno,
                         "embedding dimension " + std::to_string(values.size()) +
                             " does not match d=" + std::to_string(d));
      }
      if (!vocab.contains(token)) return;
      const std::size_t r = vocab.index(token);
      if (r == Vocab::kPad) return;
      std::copy(values.begin(), values.end(), E.row(r).begin());
    });
  }
  return E;
}

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec, Rng& rng) {
  const std::size_t K = spec.num_classes;
  const std::size_t S = spec.signal_tokens_per_class;
  if (K < 2) throw std::invalid_argument("make_synthetic_corpus: need at least 2 classes");
  if (S == 0 || spec.vocab_size <= K * S) {
    throw std::invalid_argument("make_synthetic_corpus: vocab_size must exceed classes x signal tokens");
  }
  if (spec.max_len < 2) throw std::invalid_argument("make_synthetic_corpus: max_len must be >= 2");
  if (!(spec.filler_rate >= 0.0 && spec.filler_rate < 1.0)) {
    throw std::invalid_argument("make_synthetic_corpus: filler_rate must lie in [0, 1)");
  }
  const std::size_t fillers = spec.vocab_size - K * S;
  const std::size_t min_len = (spec.max_len + 1) / 2;

  LabelMap labels;
  for (std::size_t k = 0; k < K; ++k) labels.intern("class" + std::to_string(k));

  std::unordered_set<std::string> seen;
  auto sentence = [&](std::size_t cls) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const std::size_t len = min_len + rng.below(spec.max_len - min_len + 1);
      const std::size_t forced = rng.below(len);
      std::string text;
      for (std::size_t t = 0; t < len; ++t) {
        if (t) text += ' ';
        if (t != forced && rng.bernoulli(spec.filler_rate)) {
          text += "w" + std::to_string(rng.below(fillers));
        } else {
          text += "s" + std::to_string(cls) + "x" + std::to_string(rng.below(S));
        }
      }
      if (seen.insert(text).second) return text;
    }
    throw std::runtime_error("make_synthetic_corpus: cannot draw enough distinct sentences");
  };

  auto split = [&](std::size_t n) {
    RawDataset ds;
    ds.labels = labels;
    std::vector<std::size_t> classes(n);
    for (std::size_t i = 0; i < n; ++i) classes[i] = i % K;
    rng.shuffle(classes);
    for (std::size_t cls : classes) ds.examples.push_back({cls, std::nullopt, sentence(cls)});
    return ds;
  };

  SyntheticCorpus c;
  c.train = split(spec.n_train);
  c.dev = split(spec.n_dev);
  c.test = split(spec.n_test);
  return c;
}

}  // namespace noisecnn
