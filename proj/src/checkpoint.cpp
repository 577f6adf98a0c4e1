#include "noisecnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "noisecnn/noisegen.hpp"

namespace noisecnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

std::runtime_error bad(const std::filesystem::path& p, const std::string& msg) {
  return std::runtime_error(p.string() + ": " + msg);
}

std::size_t read_count(std::istream& in, const std::string& expected,
                       const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw bad(path, "truncated before '" + expected + "'");
  std::istringstream ss(line);
  std::string tag;
  std::size_t n = 0;
  if (!(ss >> tag >> n) || tag != expected) throw bad(path, "expected '" + expected + " <count>'");
  return n;
}

void write_block(std::ostream& out, const std::string& name, const Matrix& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  out.write(reinterpret_cast<const char*>(m.data().data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
  out << '\n';
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const ModelConfig& c = ckpt.config;
  std::vector<std::pair<std::string, std::string>> cfg = {
      {"variant", ckpt.variant},
      {"embed_dim", std::to_string(c.embed_dim)},
      {"t_fixed", std::to_string(c.t_fixed)},
      {"windows", join_sizes(c.windows)},
      {"feature_maps", std::to_string(c.feature_maps)},
      {"num_classes", std::to_string(c.num_classes)},
      {"keep", format_double(c.keep)},
      {"noise_layer", c.noise_layer ? "true" : "false"},
      {"init_mode", noise_init_name(c.init_mode)},
      {"gain", format_double(c.effective_gain())},
  };
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "config " << cfg.size() << '\n';
  for (const auto& [k, v] : cfg) out << k << '=' << v << '\n';
  out << "vocab " << ckpt.vocab.size() << '\n';
  for (const auto& t : ckpt.vocab.tokens()) out << t << '\n';
  out << "labels " << ckpt.labels.size() << '\n';
  for (const auto& n : ckpt.labels.names()) out << n << '\n';

  auto blocks = ckpt.model.theta.blocks();
  const std::size_t m = blocks.size() + (ckpt.model.noise ? 1 : 0);
  out << "blocks " << m << '\n';
  for (const auto& [name, mat] : blocks) write_block(out, name, *mat);
  if (ckpt.model.noise) write_block(out, "noise.psi", ckpt.model.noise->psi);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != std::string(kCheckpointMagic) + ' ' + std::to_string(kCheckpointVersion)) {
    throw bad(path, "not a checkpoint (bad magic or version)");
  }

  std::map<std::string, std::string> cfg;
  const std::size_t nc = read_count(in, "config", path);
  for (std::size_t i = 0; i < nc; ++i) {
    if (!std::getline(in, line)) throw bad(path, "truncated config");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw bad(path, "bad config line '" + line + "'");
    cfg[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& k) {
    auto it = cfg.find(k);
    if (it == cfg.end()) throw bad(path, "config key '" + k + "' missing");
    return it->second;
  };

  Checkpoint ck;
  ck.variant = get("variant");
  ck.config.embed_dim = std::stoull(get("embed_dim"));
  ck.config.t_fixed = std::stoull(get("t_fixed"));
  ck.config.windows = split_sizes(get("windows"));
  ck.config.feature_maps = std::stoull(get("feature_maps"));
  ck.config.num_classes = std::stoull(get("num_classes"));
  ck.config.keep = std::stod(get("keep"));
  ck.config.noise_layer = get("noise_layer") == "true";
  ck.config.init_mode = parse_noise_init(get("init_mode"));
  ck.config.gain = std::stod(get("gain"));

  std::vector<std::string> tokens(read_count(in, "vocab", path));
  for (auto& t : tokens) {
    if (!std::getline(in, t)) throw bad(path, "truncated vocabulary");
  }
  ck.vocab = Vocab::from_tokens(std::move(tokens));
  std::vector<std::string> names(read_count(in, "labels", path));
  for (auto& n : names) {
    if (!std::getline(in, n)) throw bad(path, "truncated label list");
  }
  ck.labels = LabelMap(std::move(names));

  std::map<std::string, Matrix> blocks;
  const std::size_t nb = read_count(in, "blocks", path);
  for (std::size_t b = 0; b < nb; ++b) {
    if (!std::getline(in, line)) throw bad(path, "truncated block header");
    std::istringstream ss(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(ss >> name >> rows >> cols)) throw bad(path, "bad block header '" + line + "'");
    std::vector<double> data(rows * cols);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (in.get() != '\n' || !in) throw bad(path, "truncated block '" + name + "'");
    blocks.emplace(name, Matrix(rows, cols, std::move(data)));
  }

  auto take = [&](const std::string& name) {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw bad(path, "block '" + name + "' missing");
    return it->second;
  };
  BaseModelParams& th = ck.model.theta;
  th.windows = ck.config.windows;
  th.keep = ck.config.keep;
  th.embedding = take("embedding");
  for (std::size_t w : th.windows) {
    th.filters.push_back(take("conv" + std::to_string(w) + ".filters"));
    th.biases.push_back(take("conv" + std::to_string(w) + ".bias"));
  }
  th.dense_w = take("dense.w");
  th.dense_b = take("dense.b");
  if (th.embedding.rows() != ck.vocab.size() || th.embedding.cols() != ck.config.embed_dim ||
      th.dense_w.rows() != ck.config.num_classes || ck.labels.size() != ck.config.num_classes) {
    throw bad(path, "parameter shapes disagree with the stored configuration");
  }
  if (ck.config.noise_layer) {
    ck.model.noise = NoiseLayer{take("noise.psi"), ck.config.init_mode, ck.config.gain};
  }
  return ck;
}

}  // namespace noisecnn
