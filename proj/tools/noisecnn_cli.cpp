// noisecnn: corrupt datasets, train noise-adapted text classifiers, evaluate,
// probe learned representations and inspect learned noise layers.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "noisecnn/checkpoint.hpp"
#include "noisecnn/experiment.hpp"
#include "noisecnn/noisegen.hpp"
#include "noisecnn/textpipe.hpp"
#include "noisecnn/train.hpp"

namespace fs = std::filesystem;
using namespace noisecnn;

namespace {

/// Collects outputs in a sibling staging directory and moves them into place
/// only on commit(); anything staged is removed if the command fails.
class StagedOutput {
 public:
  explicit StagedOutput(fs::path target) : target_(std::move(target)) {
    staging_ = target_;
    static int counter = 0;
    staging_ += ".partial-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~StagedOutput() {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  fs::path path(const fs::path& rel) {
    fs::path p = staging_ / rel;
    fs::create_directories(p.parent_path());
    files_.insert(rel);
    return p;
  }

  void commit() {
    fs::create_directories(target_);
    for (const auto& rel : files_) {
      fs::create_directories((target_ / rel).parent_path());
      fs::rename(staging_ / rel, target_ / rel);
    }
    files_.clear();
  }

 private:
  fs::path target_;
  fs::path staging_;
  std::set<fs::path> files_;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

std::string matrix_csv(const Matrix& m) {
  std::ostringstream out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  return out.str();
}

std::string fixed4(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(4);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- corrupt

struct CorruptArgs {
  fs::path input, output;
  std::optional<fs::path> phi_out;
  std::string kind = "uniform";
  double p = 0.0;
  std::optional<std::size_t> k;
  std::optional<fs::path> matrix;
  std::uint64_t seed = 1;
};

int cmd_corrupt(const CorruptArgs& a) {
  RawDataset data = load_tsv(a.input);
  const std::size_t observed = data.labels.size();
  const NoiseKind kind = parse_noise_kind(a.kind);

  std::optional<TransitionMatrix> phi;
  switch (kind) {
    case NoiseKind::uniform:
      phi = build_uniform_noise(a.k.value_or(observed), a.p);
      break;
    case NoiseKind::random: {
      Rng rng(derive_seed(a.seed, "noise_matrix"));
      phi = build_random_noise(a.k.value_or(observed), a.p, rng);
      break;
    }
    case NoiseKind::custom:
      if (!a.matrix) throw std::invalid_argument("--kind custom requires --matrix");
      {
        std::vector<std::string> warnings;
        phi = build_custom_noise(read_matrix_csv(*a.matrix), &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      }
      break;
  }
  if (phi->num_classes() != observed) {
    throw std::invalid_argument("noise matrix has K=" + std::to_string(phi->num_classes()) + " but " +
                                a.input.string() + " has " + std::to_string(observed) + " labels");
  }

  std::vector<std::size_t> clean;
  for (const auto& e : data.examples) clean.push_back(e.label);
  Rng rng(derive_seed(a.seed, "corruption"));
  const auto noisy = sample_noisy_labels(clean, *phi, rng);
  for (std::size_t i = 0; i < noisy.size(); ++i) data.examples[i].noisy_label = noisy[i];

  const fs::path out_dir = a.output.has_parent_path() ? a.output.parent_path() : fs::path(".");
  const fs::path phi_path = a.phi_out.value_or(out_dir / "phi.csv");
  StagedOutput tsv_stage(out_dir);
  write_tsv(tsv_stage.path(a.output.filename()), data);
  StagedOutput phi_stage(phi_path.has_parent_path() ? phi_path.parent_path() : fs::path("."));
  write_matrix_csv(phi_stage.path(phi_path.filename()), phi->phi());
  tsv_stage.commit();
  phi_stage.commit();

  std::cout << "examples=" << noisy.size() << " classes=" << observed
            << " flip_fraction=" << format_double(flip_fraction(clean, noisy))
            << " expected=" << format_double(phi->expected_flip_rate()) << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path config;
  fs::path out;
  std::optional<std::size_t> repeats;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> features;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = ExperimentConfig::from_ini(IniFile::load(a.config));
  if (a.repeats) cfg.repeats = *a.repeats;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const std::optional<FeatureKind> feature_kind =
      a.features ? std::optional(parse_feature_kind(*a.features)) : std::nullopt;

  StagedOutput stage(a.out);
  write_text(stage.path("config.ini"), cfg.to_ini().str());

  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  std::vector<double> accs;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = repeat_seed(cfg.seed, r);
    const fs::path dir = cfg.repeats == 1 ? fs::path() : fs::path("run" + std::to_string(r));
    const PreparedData data = prepare_data(cfg, seed);
    RunOutput run = run_experiment(cfg, seed, &data);

    write_text(stage.path(dir / "metrics.jsonl"), run_record_jsonl(run.record));
    save_checkpoint(stage.path(dir / "model.ckpt"), run.checkpoint);
    if (run.checkpoint.model.noise) write_matrix_csv(stage.path(dir / "psi.csv"), run.checkpoint.model.noise->psi);
    if (data.phi) write_matrix_csv(stage.path(dir / "phi.csv"), data.phi->phi());
    if (feature_kind) {
      write_features_csv(stage.path(dir / "features.csv"), data.train,
                         extract_features(data.train, run.checkpoint.model.theta, *feature_kind));
    }

    nlohmann::ordered_json j;
    j["run"] = r;
    j["seed"] = seed;
    j["test_acc"] = run.test_acc;
    j["best_epoch"] = run.record.best_epoch ? nlohmann::ordered_json(*run.record.best_epoch)
                                            : nlohmann::ordered_json();
    j["epochs_run"] = run.record.epochs.size();
    j["train_flip_fraction"] = run.realized_flip;
    if (run.checkpoint.model.noise) j["psi_fro"] = frobenius_norm(run.checkpoint.model.noise->psi);
    runs.push_back(j);
    accs.push_back(run.test_acc);
    std::cout << "run " << r << " seed=" << seed << " test_acc=" << fixed4(run.test_acc)
              << " best_epoch=" << (run.record.best_epoch ? std::to_string(*run.record.best_epoch) : "-")
              << '\n';
  }

  double mean = 0.0;
  for (double v : accs) mean += v;
  mean /= static_cast<double>(accs.size());
  double var = 0.0;
  for (double v : accs) var += (v - mean) * (v - mean);
  const double sd = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;

  nlohmann::ordered_json summary;
  summary["variant"] = variant_name(cfg.variant);
  summary["seed"] = cfg.seed;
  summary["repeats"] = cfg.repeats;
  summary["mean_test_acc"] = mean;
  summary["std_test_acc"] = sd;
  summary["runs"] = runs;
  write_text(stage.path("summary.json"), summary.dump(2) + "\n");
  stage.commit();
  std::cout << "mean_test_acc=" << fixed4(mean) << " std_test_acc=" << fixed4(sd) << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

LabeledDataset load_test_for(const Checkpoint& ck, const fs::path& path) {
  RawDataset raw = load_tsv(path, ck.labels, false);
  std::set<std::size_t> seen;
  for (const auto& e : raw.examples) seen.insert(e.label);
  if (seen.size() != ck.config.num_classes) {
    throw std::invalid_argument(path.string() + " has " + std::to_string(seen.size()) +
                                " classes but the checkpoint has K=" +
                                std::to_string(ck.config.num_classes));
  }
  return encode_dataset(raw, ck.vocab, ck.config.t_fixed, Split::test, ck.config.num_classes);
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& test_path, const std::optional<fs::path>& out) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const LabeledDataset test = load_test_for(ck, test_path);
  nlohmann::ordered_json j;
  j["checkpoint"] = ckpt_path.string();
  j["variant"] = ck.variant;
  j["examples"] = test.size();
  j["accuracy"] = evaluate_clean(test, ck.model.theta);
  const std::string text = j.dump() + "\n";
  if (out) {
    StagedOutput stage(*out);
    write_text(stage.path("eval.json"), text);
    stage.commit();
  }
  std::cout << text;
  return 0;
}

// ---------------------------------------------------------------- inspect-noise

int cmd_inspect(const fs::path& ckpt_path, const std::optional<fs::path>& true_matrix,
                const std::optional<fs::path>& out) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  if (!ck.model.noise) throw std::invalid_argument(ckpt_path.string() + ": no noise layer");
  const Matrix& psi = ck.model.noise->psi;
  const Matrix response = column_normalize(softmax_response(psi));

  std::ostringstream report;
  report << "variant=" << ck.variant << '\n';
  report << "psi_fro=" << format_double(frobenius_norm(psi)) << '\n';
  report << "psi:\n" << matrix_csv(psi);
  report << "response:\n" << matrix_csv(response);
  if (true_matrix) {
    const Matrix phi = read_matrix_csv(*true_matrix);
    report << "pearson=" << format_double(pearson(response, phi)) << '\n';
  }
  if (out) {
    StagedOutput stage(*out);
    write_matrix_csv(stage.path("psi.csv"), psi);
    write_matrix_csv(stage.path("response.csv"), response);
    write_text(stage.path("inspect.txt"), report.str());
    stage.commit();
  }
  std::cout << report.str();
  return 0;
}

// ---------------------------------------------------------------- probe

struct ProbeArgs {
  fs::path ckpt_a, ckpt_b, train, test;
  std::string features = "pooled";
  std::uint64_t seed = 1;
  double C = 1.0;
  std::size_t epochs = 20;
  std::optional<fs::path> out;
};

int cmd_probe(const ProbeArgs& a) {
  const Checkpoint ca = load_checkpoint(a.ckpt_a);
  const Checkpoint cb = load_checkpoint(a.ckpt_b);
  if (ca.labels.names() != cb.labels.names()) {
    throw std::invalid_argument("checkpoints disagree on the label set");
  }
  const FeatureKind kind = parse_feature_kind(a.features);
  const RawDataset raw_train = load_corrupted_tsv(a.train, ca.labels, false);
  const RawDataset raw_test = load_tsv(a.test, ca.labels, false);
  const std::size_t K = ca.config.num_classes;

  std::vector<std::size_t> noisy, clean, test_labels;
  for (const auto& e : raw_train.examples) {
    clean.push_back(e.label);
    noisy.push_back(*e.noisy_label);
  }
  for (const auto& e : raw_test.examples) test_labels.push_back(e.label);

  ProbeConfig pc{a.C, a.epochs, derive_seed(a.seed, "probe")};
  std::ostringstream csv;
  csv << "representation,checkpoint,model_test_acc,probe_noisy,probe_true\n";
  std::optional<StagedOutput> stage;
  if (a.out) stage.emplace(*a.out);
  const std::pair<const char*, const Checkpoint*> reps[] = {{"TRB", &ca}, {"TRPr", &cb}};
  const fs::path paths[] = {a.ckpt_a, a.ckpt_b};
  for (std::size_t i = 0; i < 2; ++i) {
    const Checkpoint& ck = *reps[i].second;
    const auto train = encode_dataset(raw_train, ck.vocab, ck.config.t_fixed, Split::train, K);
    const auto test = encode_dataset(raw_test, ck.vocab, ck.config.t_fixed, Split::test, K);
    const Matrix ftrain = extract_features(train, ck.model.theta, kind);
    const Matrix ftest = extract_features(test, ck.model.theta, kind);
    const double acc_noisy = linear_probe(ftrain, noisy, ftest, test_labels, K, pc);
    const double acc_true = linear_probe(ftrain, clean, ftest, test_labels, K, pc);
    csv << reps[i].first << ',' << paths[i].filename().string() << ','
        << format_double(evaluate_clean(test, ck.model.theta)) << ',' << format_double(acc_noisy)
        << ',' << format_double(acc_true) << '\n';
    if (stage) {
      write_features_csv(stage->path(i == 0 ? "features_a.csv" : "features_b.csv"), train, ftrain);
    }
  }
  if (stage) {
    write_text(stage->path("probe.csv"), csv.str());
    stage->commit();
  }
  std::cout << csv.str();
  return 0;
}

// ---------------------------------------------------------------- make-synthetic

int cmd_make_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const fs::path& out) {
  Rng rng(derive_seed(seed, "synthetic"));
  const SyntheticCorpus c = make_synthetic_corpus(spec, rng);
  StagedOutput stage(out);
  write_tsv(stage.path("train.tsv"), c.train);
  write_tsv(stage.path("dev.tsv"), c.dev);
  write_tsv(stage.path("test.tsv"), c.test);
  stage.commit();
  std::cout << "train=" << c.train.examples.size() << " dev=" << c.dev.examples.size()
            << " test=" << c.test.examples.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-adaptation-layer training for text classification under label noise"};
  app.require_subcommand(1);

  CorruptArgs ca;
  auto* corrupt = app.add_subcommand("corrupt", "Inject class-conditional label noise into a TSV file");
  corrupt->add_option("input", ca.input, "label<TAB>text file")->required();
  corrupt->add_option("output", ca.output, "clean<TAB>noisy<TAB>text output")->required();
  corrupt->add_option("--kind", ca.kind, "uniform|random|custom")->check(CLI::IsMember({"uniform", "random", "custom"}));
  corrupt->add_option("--p", ca.p, "flip parameter in [0, 1]");
  corrupt->add_option("--k", ca.k, "number of classes (defaults to the labels in the file)");
  corrupt->add_option("--matrix", ca.matrix, "custom transition matrix CSV");
  corrupt->add_option("--seed", ca.seed, "master seed");
  corrupt->add_option("--phi", ca.phi_out, "where to write the transition matrix (default: phi.csv next to output)");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train one variant from a config file");
  trn->add_option("--config", ta.config, "experiment config")->required();
  trn->add_option("--out", ta.out, "output directory")->required();
  trn->add_option("--repeats", ta.repeats, "number of seeds to run");
  trn->add_option("--seed", ta.seed, "master seed override");
  trn->add_option("--features", ta.features, "also export training-set features: pooled|logits")
      ->check(CLI::IsMember({"pooled", "logits"}));

  fs::path ev_ckpt, ev_test;
  std::optional<fs::path> ev_out;
  auto* ev = app.add_subcommand("eval", "Clean-label accuracy of a checkpoint's base model");
  ev->add_option("checkpoint", ev_ckpt)->required();
  ev->add_option("test", ev_test, "label<TAB>text file")->required();
  ev->add_option("--out", ev_out, "also write eval.json here");

  fs::path in_ckpt;
  std::optional<fs::path> in_matrix, in_out;
  auto* insp = app.add_subcommand("inspect-noise", "Report on a checkpoint's learned noise layer");
  insp->add_option("checkpoint", in_ckpt)->required();
  insp->add_option("--matrix", in_matrix, "true transition matrix CSV for correlation");
  insp->add_option("--out", in_out, "also write psi.csv and response.csv here");

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "Linear probes on frozen features of two checkpoints");
  probe->add_option("baseline", pa.ckpt_a, "baseline checkpoint (TRB)")->required();
  probe->add_option("proposed", pa.ckpt_b, "noise-layer checkpoint (TRPr)")->required();
  probe->add_option("train", pa.train, "clean<TAB>noisy<TAB>text file")->required();
  probe->add_option("test", pa.test, "label<TAB>text file")->required();
  probe->add_option("--features", pa.features, "pooled|logits")->check(CLI::IsMember({"pooled", "logits"}));
  probe->add_option("--seed", pa.seed, "probe seed");
  probe->add_option("--C", pa.C, "inverse L2 strength");
  probe->add_option("--epochs", pa.epochs, "probe passes over the data");
  probe->add_option("--out", pa.out, "also write probe.csv and feature CSVs here");

  SyntheticSpec ss;
  std::uint64_t ss_seed = 1;
  fs::path ss_out;
  auto* syn = app.add_subcommand("make-synthetic", "Write a synthetic train/dev/test corpus");
  syn->add_option("--out", ss_out, "output directory")->required();
  syn->add_option("--seed", ss_seed, "master seed");
  syn->add_option("--k", ss.num_classes, "number of classes");
  syn->add_option("--n-train", ss.n_train);
  syn->add_option("--n-dev", ss.n_dev);
  syn->add_option("--n-test", ss.n_test);
  syn->add_option("--max-len", ss.max_len);
  syn->add_option("--vocab-size", ss.vocab_size);
  syn->add_option("--signal-tokens", ss.signal_tokens_per_class);
  syn->add_option("--filler-rate", ss.filler_rate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*corrupt) return cmd_corrupt(ca);
    if (*trn) return cmd_train(ta);
    if (*ev) return cmd_eval(ev_ckpt, ev_test, ev_out);
    if (*insp) return cmd_inspect(in_ckpt, in_matrix, in_out);
    if (*probe) return cmd_probe(pa);
    if (*syn) return cmd_make_synthetic(ss, ss_seed, ss_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
