#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "primelearn/model.hpp"

// Checkpoints: a text manifest plus params.bin holding one raw little-endian
// float32 array per named parameter. load(save(state)) is bit-exact.

namespace primelearn::checkpoint {

inline constexpr int kFormatVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  double loss = 0.0;
  std::string config_hash;
};

namespace detail {

inline void put_f32_le(std::ofstream& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline float get_f32_le(std::ifstream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated params.bin");
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir,
                            const model::ModelState<float>& state, const CheckpointMeta& meta) {
  std::filesystem::create_directories(dir);
  const auto& cfg = state.cfg;

  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw std::runtime_error("checkpoint: cannot write manifest");
  manifest << "format_version = " << kFormatVersion << "\n";
  manifest << "config_hash = " << meta.config_hash << "\n";
  manifest << "seed = " << meta.seed << "\n";
  manifest << "iteration = " << meta.iteration << "\n";
  manifest << "loss = " << detail::fmt_double(meta.loss) << "\n";
  manifest << "d_model = " << cfg.d_model << "\n";
  manifest << "res_blocks = " << cfg.n_res_blocks << "\n";
  manifest << "tx_layers = " << cfg.n_tx_layers << "\n";
  manifest << "heads = " << cfg.n_heads << "\n";
  manifest << "ff_mult = " << cfg.ff_mult << "\n";
  manifest << "shape_m = " << cfg.shape.m << "\n";
  manifest << "shape_n = " << cfg.shape.n << "\n";
  manifest << "shape_o = " << cfg.shape.o << "\n";
  manifest << "seq_len = " << cfg.shape.l << "\n";

  std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw std::runtime_error("checkpoint: cannot write params.bin");
  std::uint64_t offset = 0;
  for (const std::string& name : state.names()) {
    const auto& t = state.param(name);
    manifest << "param = " << name << " " << t.rank();
    for (std::size_t d : t.shape) manifest << " " << d;
    manifest << " " << offset << "\n";
    for (float v : t.data) detail::put_f32_le(bin, v);
    offset += t.numel() * 4;
  }
  if (!manifest || !bin) throw std::runtime_error("checkpoint: write failed");
}

struct LoadedCheckpoint {
  model::ModelState<float> state;
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::runtime_error("checkpoint: cannot open manifest in " + dir.string());

  std::map<std::string, std::string> kv;
  struct ParamEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset;
  };
  std::vector<ParamEntry> entries;

  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed manifest line");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    if (key == "param") {
      std::istringstream iss(value);
      ParamEntry entry;
      std::size_t rank = 0;
      iss >> entry.name >> rank;
      entry.shape.resize(rank);
      for (auto& d : entry.shape) iss >> d;
      iss >> entry.offset;
      if (!iss) throw std::runtime_error("checkpoint: malformed param entry");
      entries.push_back(std::move(entry));
    } else {
      kv[key] = value;
    }
  }

  auto require = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("checkpoint: manifest missing key " + key);
    return it->second;
  };
  if (std::stoi(require("format_version")) != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version");

  model::ModelConfig cfg;
  cfg.d_model = std::stoull(require("d_model"));
  cfg.n_res_blocks = std::stoull(require("res_blocks"));
  cfg.n_tx_layers = std::stoull(require("tx_layers"));
  cfg.n_heads = std::stoull(require("heads"));
  cfg.ff_mult = std::stoull(require("ff_mult"));
  cfg.shape.m = std::stoull(require("shape_m"));
  cfg.shape.n = std::stoull(require("shape_n"));
  cfg.shape.o = std::stoull(require("shape_o"));
  cfg.shape.l = std::stoull(require("seq_len"));

  LoadedCheckpoint result{model::ModelState<float>::zeros(cfg), {}};
  result.meta.seed = std::stoull(require("seed"));
  result.meta.iteration = std::stoull(require("iteration"));
  result.meta.loss = std::stod(require("loss"));
  result.meta.config_hash = kv.count("config_hash") ? kv["config_hash"] : "";

  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("checkpoint: cannot open params.bin");
  for (const auto& entry : entries) {
    auto& t = result.state.param(entry.name);
    if (t.shape != entry.shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + entry.name);
    bin.seekg(static_cast<std::streamoff>(entry.offset));
    for (auto& v : t.data) v = detail::get_f32_le(bin);
  }
  return result;
}

}  // namespace primelearn::checkpoint
