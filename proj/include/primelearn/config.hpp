#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "primelearn/training.hpp"

// Plain key = value run configuration. Parsing is strict: unknown keys are
// rejected by name, and parse(canonical_text(cfg)) round-trips exactly.

namespace primelearn::config {

struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::uint64_t train_offset = 0;
  std::uint64_t train_start = 0;
  std::uint64_t train_end = 100000;
  std::uint64_t test_offset = 0;
  std::uint64_t test_start = 100000;
  std::uint64_t test_end = 300000;
  std::size_t shape_m = 70;
  std::size_t shape_n = 70;
  std::size_t shape_o = 70;
  std::size_t seq_len = 15;
  double sample_fraction = 0.05;
  std::size_t d_model = 64;
  std::size_t res_blocks = 2;
  std::size_t tx_layers = 2;
  std::size_t heads = 4;
  std::size_t ff_mult = 4;
  double w0 = 1.0;
  double w1 = 20.0;
  double lr0 = 0.01;
  double decay_factor = 0.5;
  std::size_t patience = 5;
  std::size_t batch_size = 1;
  std::size_t epochs = 4;
  std::size_t eval_every = 250;
  double eval_subsample = 0.1;
  std::uint64_t master_seed = 1;

  bool operator==(const RunConfig&) const = default;

  encoding::EncodingShape shape() const { return {shape_m, shape_n, shape_o, seq_len}; }

  dataset::SplitConfig split() const {
    dataset::SplitConfig s;
    s.train = {train_offset, train_start, train_end};
    s.test = {test_offset, test_start, test_end};
    s.shape = shape();
    s.sample_fraction = sample_fraction;
    return s;
  }

  model::ModelConfig model() const {
    model::ModelConfig m;
    m.d_model = d_model;
    m.n_res_blocks = res_blocks;
    m.n_tx_layers = tx_layers;
    m.n_heads = heads;
    m.ff_mult = ff_mult;
    m.shape = shape();
    return m;
  }

  training::TrainConfig train() const {
    training::TrainConfig t;
    t.split = split();
    t.model_cfg = model();
    t.weights = {w0, w1};
    t.lr0 = lr0;
    t.decay_factor = decay_factor;
    t.patience = patience;
    t.batch_size = batch_size;
    t.epochs = epochs;
    t.eval_every = eval_every;
    t.eval_subsample = eval_subsample;
    t.master_seed = master_seed;
    return t;
  }
};

namespace detail {

inline std::string fmt_full(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw config_error("config: invalid value for key " + key);
  }
  if (pos != value.size() || value[0] == '-')
    throw config_error("config: invalid value for key " + key);
  return static_cast<T>(v);
}

inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw config_error("config: invalid value for key " + key);
  }
  if (pos != value.size()) throw config_error("config: invalid value for key " + key);
  return v;
}

}  // namespace detail

inline std::string canonical_text(const RunConfig& c) {
  std::ostringstream out;
  out << "# primelearn run configuration\n";
  out << "train_offset = " << c.train_offset << "\n";
  out << "train_start = " << c.train_start << "\n";
  out << "train_end = " << c.train_end << "\n";
  out << "test_offset = " << c.test_offset << "\n";
  out << "test_start = " << c.test_start << "\n";
  out << "test_end = " << c.test_end << "\n";
  out << "shape_m = " << c.shape_m << "\n";
  out << "shape_n = " << c.shape_n << "\n";
  out << "shape_o = " << c.shape_o << "\n";
  out << "seq_len = " << c.seq_len << "\n";
  out << "sample_fraction = " << detail::fmt_full(c.sample_fraction) << "\n";
  out << "d_model = " << c.d_model << "\n";
  out << "res_blocks = " << c.res_blocks << "\n";
  out << "tx_layers = " << c.tx_layers << "\n";
  out << "heads = " << c.heads << "\n";
  out << "ff_mult = " << c.ff_mult << "\n";
  out << "w0 = " << detail::fmt_full(c.w0) << "\n";
  out << "w1 = " << detail::fmt_full(c.w1) << "\n";
  out << "lr0 = " << detail::fmt_full(c.lr0) << "\n";
  out << "decay_factor = " << detail::fmt_full(c.decay_factor) << "\n";
  out << "patience = " << c.patience << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "eval_every = " << c.eval_every << "\n";
  out << "eval_subsample = " << detail::fmt_full(c.eval_subsample) << "\n";
  out << "master_seed = " << c.master_seed << "\n";
  return out.str();
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  bool test_offset_given = false;
  bool train_offset_given = false;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw config_error("config: malformed line (expected key = value): " + stripped);
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw config_error("config: malformed line (expected key = value): " + stripped);
    if (!seen.insert(key).second) throw config_error("config: duplicate key " + key);

    if (key == "train_offset") {
      cfg.train_offset = detail::parse_unsigned<std::uint64_t>(key, value);
      train_offset_given = true;
    } else if (key == "train_start")
      cfg.train_start = detail::parse_unsigned<std::uint64_t>(key, value);
    else if (key == "train_end")
      cfg.train_end = detail::parse_unsigned<std::uint64_t>(key, value);
    else if (key == "test_offset") {
      cfg.test_offset = detail::parse_unsigned<std::uint64_t>(key, value);
      test_offset_given = true;
    } else if (key == "test_start")
      cfg.test_start = detail::parse_unsigned<std::uint64_t>(key, value);
    else if (key == "test_end")
      cfg.test_end = detail::parse_unsigned<std::uint64_t>(key, value);
    else if (key == "shape_m")
      cfg.shape_m = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "shape_n")
      cfg.shape_n = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "shape_o")
      cfg.shape_o = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "seq_len")
      cfg.seq_len = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "sample_fraction")
      cfg.sample_fraction = detail::parse_double(key, value);
    else if (key == "d_model")
      cfg.d_model = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "res_blocks")
      cfg.res_blocks = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "tx_layers")
      cfg.tx_layers = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "heads")
      cfg.heads = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "ff_mult")
      cfg.ff_mult = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "w0")
      cfg.w0 = detail::parse_double(key, value);
    else if (key == "w1")
      cfg.w1 = detail::parse_double(key, value);
    else if (key == "lr0")
      cfg.lr0 = detail::parse_double(key, value);
    else if (key == "decay_factor")
      cfg.decay_factor = detail::parse_double(key, value);
    else if (key == "patience")
      cfg.patience = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "batch_size")
      cfg.batch_size = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "epochs")
      cfg.epochs = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "eval_every")
      cfg.eval_every = detail::parse_unsigned<std::size_t>(key, value);
    else if (key == "eval_subsample")
      cfg.eval_subsample = detail::parse_double(key, value);
    else if (key == "master_seed")
      cfg.master_seed = detail::parse_unsigned<std::uint64_t>(key, value);
    else
      throw config_error("config: unknown key " + key);
  }
  // Ranges share the training offset unless the file overrides it.
  if (train_offset_given && !test_offset_given) cfg.test_offset = cfg.train_offset;
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

// FNV-1a over the canonical text; identifies the producing config in every
// emitted file.
inline std::string config_hash(const RunConfig& cfg) {
  const std::string text = canonical_text(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace primelearn::config
