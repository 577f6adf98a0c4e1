#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>


#include "noisecnn/checkpoint.hpp"
#include "noisecnn/config.hpp"
#include "noisecnn/experiment.hpp"
#include "noisecnn/model.hpp"
#include "noisecnn/noisegen.hpp"
#include "noisecnn/ops.hpp"
#include "noisecnn/train.hpp"

namespace py = pybind11;
using namespace noisecnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// 1-D arrays become column vectors.
Matrix to_matrix(const Array& a) {
  if (a.ndim() == 1) return Matrix(static_cast<std::size_t>(a.shape(0)), 1, {a.data(), a.data() + a.size()});
  if (a.ndim() != 2) throw std::invalid_argument("expected a 1-D or 2-D array");
  return Matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                {a.data(), a.data() + a.size()});
}

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_vector(const Matrix& m) {
  py::array_t<double> out(static_cast<py::ssize_t>(m.size()));
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::list split_rows(const RawDataset& ds) {
  py::list rows;
  for (const auto& ex : ds.examples) rows.append(py::make_tuple(ds.labels.name(ex.label), ex.text));
  return rows;
}

py::dict record_dict(const RunRecord& record) {
  py::list epochs;
  for (const auto& e : record.epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["train_loss"] = e.train_loss;
    d["dev_acc"] = e.dev_acc;
    d["test_acc"] = e.test_acc ? py::cast(*e.test_acc) : py::none();
    d["psi_fro"] = e.psi_fro ? py::cast(*e.psi_fro) : py::none();
    epochs.append(d);
  }
  py::dict out;
  out["epochs"] = epochs;
  out["best_epoch"] = record.best_epoch ? py::cast(*record.best_epoch) : py::none();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Noise-adaptation text CNN: noise models, noise layer and training runs";

  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("name"), py::arg("index") = 0);

  m.def("build_uniform_noise", [](std::size_t K, double p) { return to_numpy(build_uniform_noise(K, p).phi()); },
        py::arg("k"), py::arg("p"));
  m.def(
      "build_random_noise",
      [](std::size_t K, double p, std::uint64_t seed) {
        Rng rng(seed);
        return to_numpy(build_random_noise(K, p, rng).phi());
      },
      py::arg("k"), py::arg("p"), py::arg("seed"));
  m.def("build_class_dependent_noise",
        [](const std::vector<double>& keep) { return to_numpy(build_class_dependent_noise(keep).phi()); },
        py::arg("keep_rates"));
  m.def(
      "sample_noisy_labels",
      [](const std::vector<std::size_t>& clean, const Array& phi, std::uint64_t seed) {
        Rng rng(seed);
        return sample_noisy_labels(clean, TransitionMatrix(to_matrix(phi), NoiseKind::custom), rng);
      },
      py::arg("clean"), py::arg("phi"), py::arg("seed"));
  m.def(
      "flip_fraction",
      [](const std::vector<std::size_t>& clean, const std::vector<std::size_t>& noisy) {
        return flip_fraction(clean, noisy);
      },
      py::arg("clean"), py::arg("noisy"));

  m.def("softmax", [](const Array& v) { return to_vector(ops::softmax(to_matrix(v))); }, py::arg("v"));
  m.def(
      "apply_noise_layer",
      [](const Array& psi, const Array& p) { return to_vector(apply_noise_layer(to_matrix(psi), to_matrix(p))); },
      py::arg("psi"), py::arg("base_probs"));
  m.def("softmax_response", [](const Array& psi) { return to_numpy(softmax_response(to_matrix(psi))); },
        py::arg("psi"));
  m.def("column_normalize", [](const Array& a) { return to_numpy(column_normalize(to_matrix(a))); }, py::arg("m"));
  m.def("pearson", [](const Array& a, const Array& b) { return pearson(to_matrix(a), to_matrix(b)); },
        py::arg("a"), py::arg("b"));
  m.def("frobenius_norm", [](const Array& a) { return frobenius_norm(to_matrix(a)); }, py::arg("m"));

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def(
      "make_synthetic_corpus",
      [](std::uint64_t seed, std::size_t k, std::size_t n_train, std::size_t n_dev, std::size_t n_test,
         std::size_t max_len, std::size_t vocab_size, std::size_t signal_tokens, double filler_rate) {
        SyntheticSpec spec{k, n_train, n_dev, n_test, max_len, vocab_size, signal_tokens, filler_rate};
        Rng rng(derive_seed(seed, "synthetic"));
        const SyntheticCorpus c = make_synthetic_corpus(spec, rng);
        py::dict out;
        out["train"] = split_rows(c.train);
        out["dev"] = split_rows(c.dev);
        out["test"] = split_rows(c.test);
        return out;
      },
      py::arg("seed") = 1, py::arg("k") = 4, py::arg("n_train") = 4000, py::arg("n_dev") = 500,
      py::arg("n_test") = 500, py::arg("max_len") = 20, py::arg("vocab_size") = 2000,
      py::arg("signal_tokens") = 50, py::arg("filler_rate") = 0.85);

  m.def(
      "run_experiment",
      [](const std::string& config_text, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> checkpoint) {
        ExperimentConfig cfg = ExperimentConfig::from_ini(IniFile::parse(config_text, "<config>"));
        RunOutput out;
        {
          py::gil_scoped_release release;
          out = run_experiment(cfg, seed.value_or(cfg.seed));
          if (checkpoint) save_checkpoint(*checkpoint, out.checkpoint);
        }
        py::dict d = record_dict(out.record);
        d["variant"] = out.checkpoint.variant;
        d["test_acc"] = out.test_acc;
        d["realized_flip"] = out.realized_flip;
        d["psi"] = out.checkpoint.model.noise ? py::object(to_numpy(out.checkpoint.model.noise->psi)) : py::none();
        return d;
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("checkpoint") = py::none(),
      "Runs one training job from INI-format config text and returns its record. The trained\n"
      "model is saved when `checkpoint` is given.");

  m.def(
      "evaluate_checkpoint",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& tsv) {
        const Checkpoint ck = load_checkpoint(ckpt);
        const RawDataset raw = load_tsv(tsv, ck.labels, false);
        const auto test = encode_dataset(raw, ck.vocab, ck.config.t_fixed, Split::test, ck.config.num_classes);
        return evaluate_clean(test, ck.model.theta);
      },
      py::arg("checkpoint"), py::arg("test_tsv"));
  m.def(
      "extract_features",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& tsv, const std::string& kind,
         bool corrupted) {
        const Checkpoint ck = load_checkpoint(ckpt);
        const RawDataset raw = corrupted ? load_corrupted_tsv(tsv, ck.labels, false) : load_tsv(tsv, ck.labels, false);
        const auto ds = encode_dataset(raw, ck.vocab, ck.config.t_fixed, Split::test, ck.config.num_classes);
        std::vector<std::size_t> labels, noisy;
        for (const auto& e : raw.examples) {
          labels.push_back(e.label);
          if (e.noisy_label) noisy.push_back(*e.noisy_label);
        }
        py::dict d;
        d["features"] = to_numpy(extract_features(ds, ck.model.theta, parse_feature_kind(kind)));
        d["labels"] = labels;
        d["noisy_labels"] = corrupted ? py::cast(noisy) : py::none();
        return d;
      },
      py::arg("checkpoint"), py::arg("tsv"), py::arg("kind") = "pooled", py::arg("corrupted") = false,
      "Frozen features of a TSV file under a checkpoint's base model, with the file's label indices.");
  m.def(
      "inspect_checkpoint",
      [](const std::filesystem::path& ckpt) {
        const Checkpoint ck = load_checkpoint(ckpt);
        py::dict d;
        d["variant"] = ck.variant;
        d["labels"] = ck.labels.names();
        d["vocab_size"] = ck.vocab.size();
        d["psi"] = ck.model.noise ? py::object(to_numpy(ck.model.noise->psi)) : py::none();
        return d;
      },
      py::arg("checkpoint"));

  m.def(
      "linear_probe",
      [](const Array& train_x, const std::vector<std::size_t>& train_y, const Array& test_x,
         const std::vector<std::size_t>& test_y, std::size_t k, double C, std::size_t epochs, std::uint64_t seed) {
        return linear_probe(to_matrix(train_x), train_y, to_matrix(test_x), test_y, k, ProbeConfig{C, epochs, seed});
      },
      py::arg("train_x"), py::arg("train_y"), py::arg("test_x"), py::arg("test_y"), py::arg("k"),
      py::arg("C") = 1.0, py::arg("epochs") = 20, py::arg("seed") = 0);
}
