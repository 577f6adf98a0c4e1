#include "noisecnn/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace noisecnn {

namespace {

std::invalid_argument field_error(const std::string& field, const std::string& msg) {
  return std::invalid_argument(field + ": " + msg);
}

class Reader {
 public:
  explicit Reader(const IniFile& ini) : ini_(ini) {}

  std::optional<std::string> raw(const std::string& s, const std::string& k) const {
    return ini_.get(s, k);
  }
  bool has(const std::string& s, const std::string& k) const { return ini_.has(s, k); }

  std::string str(const std::string& s, const std::string& k, const std::string& def) const {
    return raw(s, k).value_or(def);
  }

  double num(const std::string& s, const std::string& k, double def) const {
    auto v = raw(s, k);
    if (!v) return def;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return d;
    } catch (const std::exception&) {
      throw field_error(s + "." + k, "expected a number, got '" + *v + "'");
    }
  }

  std::uint64_t count(const std::string& s, const std::string& k, std::uint64_t def) const {
    auto v = raw(s, k);
    if (!v) return def;
    if (v->empty() || v->find_first_not_of("0123456789") != std::string::npos) {
      throw field_error(s + "." + k, "expected a non-negative integer, got '" + *v + "'");
    }
    return std::stoull(*v);
  }

  bool flag(const std::string& s, const std::string& k, bool def) const {
    auto v = raw(s, k);
    if (!v) return def;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw field_error(s + "." + k, "expected true or false");
  }

  template <typename T, typename Parse>
  std::vector<T> list(const std::string& s, const std::string& k, std::vector<T> def,
                      Parse parse) const {
    auto v = raw(s, k);
    if (!v) return def;
    std::vector<T> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(parse(item));
      } catch (const std::exception&) {
        throw field_error(s + "." + k, "bad list entry '" + item + "'");
      }
    }
    return out;
  }

 private:
  const IniFile& ini_;
};

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

bool stacks_noise_layer(Variant v) { return v != Variant::wonm; }

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::wonm: return "wonm";
    case Variant::nmworegu: return "nmworegu";
    case Variant::nmwregu: return "nmwregu";
    case Variant::tdwregu: return "tdwregu";
    case Variant::randwregu: return "randwregu";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::wonm, Variant::nmworegu, Variant::nmwregu, Variant::tdwregu,
                    Variant::randwregu}) {
    if (variant_name(v) == s) return v;
  }
  throw field_error("experiment.variant",
                    "unknown variant '" + s + "' (expected wonm|nmworegu|nmwregu|tdwregu|randwregu)");
}

ExperimentConfig ExperimentConfig::from_ini(const IniFile& ini) {
  Reader r(ini);
  ExperimentConfig c;
  c.variant = parse_variant(r.str("experiment", "variant", "nmwregu"));
  c.seed = r.count("experiment", "seed", 1);
  c.repeats = r.count("experiment", "repeats", 1);

  const std::string source = r.str("data", "source", "synthetic");
  if (source != "synthetic" && source != "files") {
    throw field_error("data.source", "expected synthetic or files");
  }
  c.data.synthetic = source == "synthetic";
  c.data.min_count = r.count("data", "min_count", 1);
  if (auto e = r.raw("data", "embeddings")) c.data.embeddings = *e;
  if (c.data.synthetic) {
    SyntheticSpec& s = c.data.synth;
    s.num_classes = r.count("synthetic", "classes", s.num_classes);
    s.n_train = r.count("synthetic", "n_train", s.n_train);
    s.n_dev = r.count("synthetic", "n_dev", s.n_dev);
    s.n_test = r.count("synthetic", "n_test", s.n_test);
    s.max_len = r.count("synthetic", "max_len", s.max_len);
    s.vocab_size = r.count("synthetic", "vocab_size", s.vocab_size);
    s.signal_tokens_per_class = r.count("synthetic", "signal_tokens", s.signal_tokens_per_class);
    s.filler_rate = r.num("synthetic", "filler_rate", s.filler_rate);
  } else {
    for (const char* k : {"train", "dev", "test"}) {
      if (!r.has("data", k)) throw field_error(std::string("data.") + k, "required when data.source = files");
    }
    c.data.train = *r.raw("data", "train");
    c.data.dev = *r.raw("data", "dev");
    c.data.test = *r.raw("data", "test");
    const std::string fmt = r.str("data", "format", "tsv");
    if (fmt != "tsv" && fmt != "corrupted") throw field_error("data.format", "expected tsv or corrupted");
    c.data.pre_corrupted = fmt == "corrupted";
  }

  const std::string kind = r.str("noise", "kind", "none");
  if (kind != "none") c.noise.kind = parse_noise_kind(kind);
  c.noise.p = r.num("noise", "p", 0.0);
  if (auto m = r.raw("noise", "matrix")) c.noise.matrix = *m;
  c.noise.keep_rates = r.list<double>("noise", "keep_rates", {}, [](const std::string& x) { return std::stod(x); });

  ModelConfig& m = c.model;
  m.embed_dim = r.count("model", "embed_dim", m.embed_dim);
  m.t_fixed = r.count("model", "t_fixed", 0);
  m.windows = r.list<std::size_t>("model", "windows", m.windows,
                                  [](const std::string& x) { return std::stoull(x); });
  m.feature_maps = r.count("model", "feature_maps", m.feature_maps);
  m.keep = r.num("model", "keep", m.keep);
  m.noise_layer = stacks_noise_layer(c.variant);
  switch (c.variant) {
    case Variant::tdwregu: m.init_mode = NoiseInit::true_distribution; break;
    case Variant::randwregu: m.init_mode = NoiseInit::random; break;
    default: m.init_mode = NoiseInit::identity_gain; break;
  }
  if (c.variant == Variant::wonm && r.has("model", "gain")) {
    throw field_error("model.gain", "the wonm variant has no noise layer");
  }
  m.gain = r.num("model", "gain", 0.0);

  TrainConfig& t = c.train;
  t.optimizer.kind = parse_optimizer(r.str("train", "optimizer", "adadelta"));
  t.optimizer.rho = r.num("train", "rho", t.optimizer.rho);
  t.optimizer.eps = r.num("train", "eps", t.optimizer.eps);
  t.optimizer.lr = r.num("train", "lr", t.optimizer.lr);
  t.optimizer.momentum = r.num("train", "momentum", t.optimizer.momentum);
  t.batch_size = r.count("train", "batch_size", t.batch_size);
  t.max_epochs = r.count("train", "max_epochs", t.max_epochs);
  t.patience = r.count("train", "patience", t.patience);
  if (c.variant == Variant::wonm && r.has("train", "lambda")) {
    throw field_error("train.lambda", "the wonm variant has no noise layer to regularize");
  }
  const double default_lambda =
      c.variant == Variant::wonm || c.variant == Variant::nmworegu ? 0.0 : 0.01;
  t.lambda = r.num("train", "lambda", default_lambda);

  c.probe.C = r.num("probe", "C", c.probe.C);
  c.probe.epochs = r.count("probe", "epochs", c.probe.epochs);

  const auto unused = ini.unused();
  if (!unused.empty()) throw field_error(unused.front(), "unknown setting");
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (repeats == 0) throw field_error("experiment.repeats", "must be at least 1");
  switch (variant) {
    case Variant::wonm:
      if (train.lambda != 0.0) throw field_error("train.lambda", "the wonm variant has no noise layer");
      break;
    case Variant::nmworegu:
      if (train.lambda != 0.0) throw field_error("train.lambda", "nmworegu requires lambda = 0");
      break;
    case Variant::tdwregu:
      if (!noise.kind && !noise.matrix) {
        throw field_error("noise.kind", "tdwregu needs the true noise distribution");
      }
      [[fallthrough]];
    case Variant::nmwregu:
    case Variant::randwregu:
      if (!(train.lambda > 0.0)) throw field_error("train.lambda", variant_name(variant) + " requires lambda > 0");
      break;
  }
  if (noise.kind) {
    if (!(noise.p >= 0.0 && noise.p <= 1.0)) throw field_error("noise.p", "must lie in [0, 1]");
    if (*noise.kind == NoiseKind::custom && !noise.matrix && noise.keep_rates.empty()) {
      throw field_error("noise.matrix", "custom noise needs a matrix file or keep_rates");
    }
    if (!data.synthetic && data.pre_corrupted) {
      throw field_error("noise.kind", "pre-corrupted data must not be corrupted again");
    }
  }
  if (model.gain < 0.0) throw field_error("model.gain", "must be positive");
  if (!(model.keep > 0.0 && model.keep <= 1.0)) throw field_error("model.keep", "must lie in (0, 1]");
  if (model.windows.empty()) throw field_error("model.windows", "must not be empty");
  if (model.embed_dim == 0) throw field_error("model.embed_dim", "must be positive");
  if (model.feature_maps == 0) throw field_error("model.feature_maps", "must be positive");
  if (train.batch_size == 0) throw field_error("train.batch_size", "must be at least 1");
  if (train.patience == 0) throw field_error("train.patience", "must be at least 1");
  if (!(probe.C > 0.0)) throw field_error("probe.C", "must be positive");
}

IniFile ExperimentConfig::to_ini() const {
  IniFile ini;
  ini.set("experiment", "variant", variant_name(variant));
  ini.set("experiment", "seed", std::to_string(seed));
  ini.set("experiment", "repeats", std::to_string(repeats));

  ini.set("data", "source", data.synthetic ? "synthetic" : "files");
  if (!data.synthetic) {
    ini.set("data", "train", data.train.string());
    ini.set("data", "dev", data.dev.string());
    ini.set("data", "test", data.test.string());
    ini.set("data", "format", data.pre_corrupted ? "corrupted" : "tsv");
  }
  ini.set("data", "min_count", std::to_string(data.min_count));
  if (data.embeddings) ini.set("data", "embeddings", data.embeddings->string());
  if (data.synthetic) {
    const SyntheticSpec& s = data.synth;
    ini.set("synthetic", "classes", std::to_string(s.num_classes));
    ini.set("synthetic", "n_train", std::to_string(s.n_train));
    ini.set("synthetic", "n_dev", std::to_string(s.n_dev));
    ini.set("synthetic", "n_test", std::to_string(s.n_test));
    ini.set("synthetic", "max_len", std::to_string(s.max_len));
    ini.set("synthetic", "vocab_size", std::to_string(s.vocab_size));
    ini.set("synthetic", "signal_tokens", std::to_string(s.signal_tokens_per_class));
    ini.set("synthetic", "filler_rate", format_double(s.filler_rate));
  }

  ini.set("noise", "kind", noise.kind ? noise_kind_name(*noise.kind) : "none");
  ini.set("noise", "p", format_double(noise.p));
  if (noise.matrix) ini.set("noise", "matrix", noise.matrix->string());
  if (!noise.keep_rates.empty()) ini.set("noise", "keep_rates", join(noise.keep_rates));

  ini.set("model", "embed_dim", std::to_string(model.embed_dim));
  ini.set("model", "t_fixed", std::to_string(model.t_fixed));
  ini.set("model", "windows", join(model.windows));
  ini.set("model", "feature_maps", std::to_string(model.feature_maps));
  ini.set("model", "keep", format_double(model.keep));
  if (variant != Variant::wonm) ini.set("model", "gain", format_double(model.gain));

  ini.set("train", "optimizer", optimizer_name(train.optimizer.kind));
  ini.set("train", "rho", format_double(train.optimizer.rho));
  ini.set("train", "eps", format_double(train.optimizer.eps));
  ini.set("train", "lr", format_double(train.optimizer.lr));
  ini.set("train", "momentum", format_double(train.optimizer.momentum));
  ini.set("train", "batch_size", std::to_string(train.batch_size));
  ini.set("train", "max_epochs", std::to_string(train.max_epochs));
  ini.set("train", "patience", std::to_string(train.patience));
  if (variant != Variant::wonm) ini.set("train", "lambda", format_double(train.lambda));

  ini.set("probe", "C", format_double(probe.C));
  ini.set("probe", "epochs", std::to_string(probe.epochs));
  return ini;
}

std::uint64_t repeat_seed(std::uint64_t master, std::size_t r) {
  return r == 0 ? master : derive_seed(master, "repeat", r);
}

PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t run_seed) {
  PreparedData d;
  if (config.data.synthetic) {
    Rng rng(derive_seed(run_seed, "synthetic"));
    auto corpus = make_synthetic_corpus(config.data.synth, rng);
    d.raw_train = std::move(corpus.train);
    d.raw_dev = std::move(corpus.dev);
    d.raw_test = std::move(corpus.test);
    d.labels = d.raw_train.labels;
  } else if (config.data.pre_corrupted) {
    d.raw_train = load_corrupted_tsv(config.data.train);
    d.raw_dev = load_corrupted_tsv(config.data.dev, d.raw_train.labels);
    d.raw_test = load_tsv(config.data.test, d.raw_dev.labels);
    d.labels = d.raw_test.labels;
  } else {
    d.raw_train = load_tsv(config.data.train);
    d.raw_dev = load_tsv(config.data.dev, d.raw_train.labels);
    d.raw_test = load_tsv(config.data.test, d.raw_dev.labels);
    d.labels = d.raw_test.labels;
  }
  const std::size_t K = d.labels.size();
  if (K < 2) throw std::invalid_argument("data: need at least two classes");

  if (config.noise.kind) {
    switch (*config.noise.kind) {
      case NoiseKind::uniform:
        d.phi = build_uniform_noise(K, config.noise.p);
        break;
      case NoiseKind::random: {
        Rng rng(derive_seed(run_seed, "noise_matrix"));
        d.phi = build_random_noise(K, config.noise.p, rng);
        break;
      }
      case NoiseKind::custom:
        d.phi = config.noise.matrix ? load_transition_csv(*config.noise.matrix)
                                    : build_class_dependent_noise(config.noise.keep_rates);
        break;
    }
    if (d.phi->num_classes() != K) {
      throw std::invalid_argument("noise: transition matrix is " + std::to_string(d.phi->num_classes()) +
                                  "x" + std::to_string(d.phi->num_classes()) + " but data has " +
                                  std::to_string(K) + " classes");
    }
    Rng rng(derive_seed(run_seed, "corruption"));
    for (RawDataset* split : {&d.raw_train, &d.raw_dev}) {
      std::vector<std::size_t> clean;
      for (const auto& e : split->examples) clean.push_back(e.label);
      const auto noisy = sample_noisy_labels(clean, *d.phi, rng);
      for (std::size_t i = 0; i < noisy.size(); ++i) split->examples[i].noisy_label = noisy[i];
    }
  } else if (config.noise.matrix) {
    d.phi = load_transition_csv(*config.noise.matrix);
  }
  for (RawDataset* split : {&d.raw_train, &d.raw_dev}) {
    for (auto& e : split->examples) {
      if (!e.noisy_label) e.noisy_label = e.label;
    }
  }

  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(d.raw_train.examples.size());
  for (const auto& e : d.raw_train.examples) corpus.push_back(tokenize(e.text));
  d.vocab = build_vocab(corpus, config.data.min_count);

  d.t_fixed = config.model.t_fixed != 0 ? config.model.t_fixed : quantile_length(d.raw_train.examples);
  const std::size_t widest = *std::max_element(config.model.windows.begin(), config.model.windows.end());
  d.t_fixed = std::max(d.t_fixed, widest);

  d.train = encode_dataset(d.raw_train, d.vocab, d.t_fixed, Split::train, K);
  d.dev = encode_dataset(d.raw_dev, d.vocab, d.t_fixed, Split::dev, K);
  d.test = encode_dataset(d.raw_test, d.vocab, d.t_fixed, Split::test, K);
  return d;
}

RunOutput run_experiment(const ExperimentConfig& config, std::uint64_t run_seed,
                         const PreparedData* data) {
  std::optional<PreparedData> owned;
  if (data == nullptr) {
    owned = prepare_data(config, run_seed);
    data = &*owned;
  }
  const std::size_t K = data->labels.size();

  ModelConfig mc = config.model;
  mc.num_classes = K;
  mc.t_fixed = data->t_fixed;

  Rng init_rng(derive_seed(run_seed, "init"));
  Matrix E = init_embeddings(data->vocab, mc.embed_dim, config.data.embeddings, init_rng);
  TrainedModel init{init_base_params(std::move(E), mc, init_rng), std::nullopt};
  if (mc.noise_layer) {
    if (mc.init_mode == NoiseInit::true_distribution && !data->phi) {
      throw std::invalid_argument("noise.kind: tdwregu needs the true noise distribution");
    }
    Rng noise_rng(derive_seed(run_seed, "noise_init"));
    init.noise = init_noise_layer(K, mc.init_mode, mc.gain, data->phi ? &*data->phi : nullptr, noise_rng);
  }

  TrainConfig tc = config.train;
  tc.shuffle_seed = derive_seed(run_seed, "shuffle");
  tc.dropout_seed = derive_seed(run_seed, "dropout");
  auto result = train(data->train, data->dev, &data->test, std::move(init), tc);

  RunOutput out;
  out.test_acc = evaluate_clean(data->test, result.model.theta);
  std::vector<std::size_t> clean, noisy;
  for (const auto& e : data->train.examples) {
    clean.push_back(e.label);
    noisy.push_back(*e.noisy_label);
  }
  out.realized_flip = flip_fraction(clean, noisy);
  out.record = std::move(result.record);
  out.checkpoint = Checkpoint{variant_name(config.variant), mc, data->vocab, data->labels,
                              std::move(result.model)};
  return out;
}

void write_features_csv(const std::filesystem::path& path, const LabeledDataset& data,
                        const Matrix& features) {
  if (features.rows() != data.size()) {
    throw std::invalid_argument("write_features_csv: feature rows do not match the dataset");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "clean_label,noisy_label";
  for (std::size_t j = 0; j < features.cols(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto& e = data.examples[i];
    out << e.label << ',' << e.noisy_label.value_or(e.label);
    for (double v : features.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace noisecnn
