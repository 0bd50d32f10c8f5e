#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "primelearn/encoding.hpp"
#include "primelearn/rng.hpp"
#include "primelearn/tape.hpp"
#include "primelearn/tensor.hpp"

// The classifier: factorized sparse embedding front end (the exact sparse
// equivalent of a dense affine layer on concatenated one-hots), a residual
// feature tower, a transformer encoder over each window, and a per-position
// sigmoid head.

namespace primelearn::model {

using encoding::EncodingShape;
using encoding::SequenceSample;
using encoding::SparseCode;
using nd::Tape;
using nd::Tensor;

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_res_blocks = 2;
  std::size_t n_tx_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ff_mult = 4;
  EncodingShape shape;

  void validate() const {
    shape.validate();
    if (d_model == 0 || n_res_blocks == 0 || n_tx_layers == 0 || n_heads == 0 || ff_mult == 0)
      throw std::invalid_argument("ModelConfig: all sizes must be >= 1");
    if (d_model % n_heads != 0)
      throw std::invalid_argument("ModelConfig: d_model must be divisible by n_heads");
  }

  bool operator==(const ModelConfig&) const = default;
};

struct LossWeights {
  double w0 = 1.0;  // non-prime
  double w1 = 20.0;  // prime

  void validate() const {
    if (!(w0 > 0) || !(w1 > 0))
      throw std::invalid_argument("LossWeights: weights must be positive");
  }
};

// Named parameter registry; iteration order is creation order, which fixes
// both the init RNG stream and the checkpoint layout.
template <class T>
class ModelState {
 public:
  ModelConfig cfg;

  static ModelState init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelState st;
    st.cfg = cfg;
    rng::Engine eng(rng::mix_seed(seed, 0xC0DEull));
    const std::size_t d = cfg.d_model;
    const auto& sh = cfg.shape;

    st.add_normal(eng, "embed_m", {sh.m, d}, 0.1);
    st.add_normal(eng, "embed_n", {sh.n, d}, 0.1);
    st.add_normal(eng, "embed_o", {sh.o, d}, 0.1);
    st.add_zeros("embed_b", {d});

    for (std::size_t i = 0; i < cfg.n_res_blocks; ++i) {
      const std::string p = "res" + std::to_string(i) + ".";
      st.add_ones(p + "ln1_g", {d});
      st.add_zeros(p + "ln1_b", {d});
      st.add_normal(eng, p + "w1", {d, d}, 1.0 / std::sqrt(static_cast<double>(d)));
      st.add_zeros(p + "b1", {d});
      st.add_ones(p + "ln2_g", {d});
      st.add_zeros(p + "ln2_b", {d});
      st.add_zeros(p + "w2", {d, d});  // zero output projection: block starts as identity
      st.add_zeros(p + "b2", {d});
    }

    st.add_normal(eng, "pos", {sh.l, d}, 0.02);

    const std::size_t ff = d * cfg.ff_mult;
    for (std::size_t i = 0; i < cfg.n_tx_layers; ++i) {
      const std::string p = "tx" + std::to_string(i) + ".";
      st.add_ones(p + "ln1_g", {d});
      st.add_zeros(p + "ln1_b", {d});
      for (const char* w : {"wq", "wk", "wv"})
        st.add_normal(eng, p + w, {d, d}, 1.0 / std::sqrt(static_cast<double>(d)));
      for (const char* b : {"bq", "bk", "bv"}) st.add_zeros(p + b, {d});
      st.add_zeros(p + "wo", {d, d});
      st.add_zeros(p + "bo", {d});
      st.add_ones(p + "ln2_g", {d});
      st.add_zeros(p + "ln2_b", {d});
      st.add_normal(eng, p + "ff1", {d, ff}, 1.0 / std::sqrt(static_cast<double>(d)));
      st.add_zeros(p + "ff1_b", {ff});
      st.add_zeros(p + "ff2", {ff, d});
      st.add_zeros(p + "ff2_b", {d});
    }

    st.add_ones("final_g", {d});
    st.add_zeros("final_b", {d});
    st.add_normal(eng, "head_w", {d, 1}, 0.1);
    st.add_zeros("head_b", {1});
    return st;
  }

  // All-zero parameters of the same layout (used by tests and format checks).
  static ModelState zeros(const ModelConfig& cfg) {
    ModelState st = init(cfg, 0);
    for (auto& v : st.values_) v.fill(T(0));
    return st;
  }

  std::size_t n_params() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  Tensor<T>& param(std::string_view name) { return values_[index_of(name)]; }
  const Tensor<T>& param(std::string_view name) const { return values_[index_of(name)]; }
  Tensor<T>& grad(std::string_view name) { return grads_[index_of(name)]; }

  Tensor<T>& param_at(std::size_t i) { return values_[i]; }
  const Tensor<T>& param_at(std::size_t i) const { return values_[i]; }
  Tensor<T>& grad_at(std::size_t i) { return grads_[i]; }

  void zero_grads() {
    for (auto& g : grads_) g.fill(T(0));
  }

  void apply_sgd(T lr) {
    for (std::size_t i = 0; i < values_.size(); ++i) nd::sgd_step(values_[i], grads_[i], lr);
  }

  std::vector<nd::ParamRef<T>> param_refs() {
    std::vector<nd::ParamRef<T>> refs;
    refs.reserve(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i)
      refs.push_back({&values_[i], &grads_[i]});
    return refs;
  }

 private:
  std::size_t index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end())
      throw std::invalid_argument("ModelState: unknown parameter " + std::string(name));
    return it->second;
  }

  void add(std::string name, Tensor<T> value) {
    index_.emplace(name, names_.size());
    names_.push_back(std::move(name));
    grads_.push_back(Tensor<T>::zeros(value.shape));
    values_.push_back(std::move(value));
  }

  void add_zeros(std::string name, std::vector<std::size_t> shape) {
    add(std::move(name), Tensor<T>::zeros(std::move(shape)));
  }

  void add_ones(std::string name, std::vector<std::size_t> shape) {
    add(std::move(name), Tensor<T>::full(std::move(shape), T(1)));
  }

  void add_normal(rng::Engine& eng, std::string name, std::vector<std::size_t> shape,
                  double stddev) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(stddev * rng::normal01(eng));
    add(std::move(name), std::move(t));
  }

  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::vector<Tensor<T>> grads_;
  std::unordered_map<std::string, std::size_t> index_;
};

// --------------------------------------------------------------------------
// Forward pipeline. All stages operate on (R x d) where R = n_windows * L.

// E_m[m] + E_n[n] + E_o[o] + b for one code; the sparse equivalent of a dense
// affine layer over the concatenated one-hot vectors.
template <class T>
std::vector<T> embed_sparse(const SparseCode& code, const ModelState<T>& state) {
  const auto& sh = state.cfg.shape;
  if (code.m >= sh.m || code.n >= sh.n || code.o >= sh.o)
    throw std::invalid_argument("embed_sparse: coordinate out of range");
  const std::size_t d = state.cfg.d_model;
  const Tensor<T>& em = state.param("embed_m");
  const Tensor<T>& en = state.param("embed_n");
  const Tensor<T>& eo = state.param("embed_o");
  const Tensor<T>& b = state.param("embed_b");
  std::vector<T> out(d);
  for (std::size_t j = 0; j < d; ++j)
    out[j] = em(code.m, j) + en(code.n, j) + eo(code.o, j) + b.data[j];
  return out;
}

template <class T>
typename Tape<T>::NodeId embed_tokens(Tape<T>& tape, ModelState<T>& state,
                                      std::span<const SparseCode> codes) {
  const auto& sh = state.cfg.shape;
  std::vector<std::size_t> mi(codes.size()), ni(codes.size()), oi(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].m >= sh.m || codes[i].n >= sh.n || codes[i].o >= sh.o)
      throw std::invalid_argument("embed_tokens: coordinate out of range");
    mi[i] = codes[i].m;
    ni[i] = codes[i].n;
    oi[i] = codes[i].o;
  }
  auto P = [&](std::string_view name) {
    return tape.leaf(state.param(name), &state.grad(name));
  };
  auto x = tape.add(tape.add(tape.embedding_lookup(P("embed_m"), std::move(mi)),
                             tape.embedding_lookup(P("embed_n"), std::move(ni))),
                    tape.embedding_lookup(P("embed_o"), std::move(oi)));
  return tape.add_rowvec(x, P("embed_b"));
}

// Pre-activation residual tower: x <- x + W2 . gelu(LN(W1 . LN(x))).
template <class T>
typename Tape<T>::NodeId feature_extract(Tape<T>& tape, ModelState<T>& state,
                                         typename Tape<T>::NodeId x) {
  auto P = [&](const std::string& name) {
    return tape.leaf(state.param(name), &state.grad(name));
  };
  for (std::size_t i = 0; i < state.cfg.n_res_blocks; ++i) {
    const std::string p = "res" + std::to_string(i) + ".";
    auto t = tape.layer_norm(x, P(p + "ln1_g"), P(p + "ln1_b"));
    auto u = tape.add_rowvec(tape.matmul(t, P(p + "w1")), P(p + "b1"));
    auto v = tape.layer_norm(u, P(p + "ln2_g"), P(p + "ln2_b"));
    auto w = tape.gelu(v);
    auto y = tape.add_rowvec(tape.matmul(w, P(p + "w2")), P(p + "b2"));
    x = tape.add(x, y);
  }
  return x;
}

// Transformer encoder over each window of L consecutive rows; learned
// positional embeddings are added before the first layer.
template <class T>
typename Tape<T>::NodeId transform_sequence(Tape<T>& tape, ModelState<T>& state,
                                            typename Tape<T>::NodeId x,
                                            std::size_t n_windows) {
  const std::size_t l = state.cfg.shape.l;
  if (tape.value(x).rows() != n_windows * l)
    throw std::invalid_argument("transform_sequence: row count must be n_windows * L");
  auto P = [&](const std::string& name) {
    return tape.leaf(state.param(name), &state.grad(name));
  };
  x = tape.add(x, tape.tile_rows(P("pos"), n_windows));
  for (std::size_t i = 0; i < state.cfg.n_tx_layers; ++i) {
    const std::string p = "tx" + std::to_string(i) + ".";
    auto a = tape.layer_norm(x, P(p + "ln1_g"), P(p + "ln1_b"));
    auto q = tape.add_rowvec(tape.matmul(a, P(p + "wq")), P(p + "bq"));
    auto k = tape.add_rowvec(tape.matmul(a, P(p + "wk")), P(p + "bk"));
    auto v = tape.add_rowvec(tape.matmul(a, P(p + "wv")), P(p + "bv"));
    auto attn = tape.windowed_attention(q, k, v, l, state.cfg.n_heads);
    auto o = tape.add_rowvec(tape.matmul(attn, P(p + "wo")), P(p + "bo"));
    x = tape.add(x, o);
    auto f = tape.layer_norm(x, P(p + "ln2_g"), P(p + "ln2_b"));
    auto h = tape.gelu(tape.add_rowvec(tape.matmul(f, P(p + "ff1")), P(p + "ff1_b")));
    auto h2 = tape.add_rowvec(tape.matmul(h, P(p + "ff2")), P(p + "ff2_b"));
    x = tape.add(x, h2);
  }
  return x;
}

// Full pipeline for a group of windows -> per-token prime probabilities
// (R x 1), each in (0, 1).
template <class T>
typename Tape<T>::NodeId forward_probabilities(Tape<T>& tape, ModelState<T>& state,
                                               std::span<const SparseCode> codes,
                                               std::size_t n_windows) {
  const std::size_t l = state.cfg.shape.l;
  if (codes.size() != n_windows * l)
    throw std::invalid_argument("forward_probabilities: code count must be n_windows * L");
  auto P = [&](std::string_view name) {
    return tape.leaf(state.param(name), &state.grad(name));
  };
  auto x = embed_tokens(tape, state, codes);
  x = feature_extract(tape, state, x);
  x = transform_sequence(tape, state, x, n_windows);
  x = tape.layer_norm(x, P("final_g"), P("final_b"));
  auto logits = tape.add_rowvec(tape.matmul(x, P("head_w")), P("head_b"));
  return tape.sigmoid(logits);
}

// Inference convenience for one window.
template <class T>
std::vector<T> predict_window(const SequenceSample& sample, ModelState<T>& state) {
  if (sample.codes.size() != state.cfg.shape.l)
    throw std::invalid_argument("predict_window: sample length must equal L");
  Tape<T> tape(false);
  auto probs = forward_probabilities(tape, state, std::span(sample.codes), 1);
  return tape.value(probs).data;
}

}  // namespace primelearn::model
