#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "primelearn/rng.hpp"
#include "primelearn/tensor.hpp"

// Reverse-mode autodiff over a flat op tape. Forward values are computed
// eagerly; backward closures replay in exact reverse order and accumulate
// gradients additively. Reductions use a fixed sequential order so a given
// (seed, input) pair replays bit-identically.

namespace primelearn::nd {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kProbClampEps = 1e-7;

namespace testhooks {
// Selftest mutation smoke: when set, the gelu backward rule flips sign so a
// gradient check must fail.
inline bool& negate_gelu_grad() {
  static bool flag = false;
  return flag;
}
}  // namespace testhooks

namespace detail {

// C(r x c) += A(r x k) * B(k x c); ikj order for contiguous inner loops.
template <class T>
void matmul_acc(const T* a, const T* b, T* c, std::size_t r, std::size_t k, std::size_t cc) {
  for (std::size_t i = 0; i < r; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * cc;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = arow[kk];
      if (aik == T(0)) continue;
      const T* brow = b + kk * cc;
      for (std::size_t j = 0; j < cc; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C(r x k) += A(r x c) * B(k x c)^T, i.e. rows of A dotted with rows of B.
template <class T>
void matmul_bt_acc(const T* a, const T* b, T* c, std::size_t r, std::size_t cc, std::size_t k) {
  for (std::size_t i = 0; i < r; ++i) {
    const T* arow = a + i * cc;
    T* crow = c + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T* brow = b + kk * cc;
      T acc = T(0);
      for (std::size_t j = 0; j < cc; ++j) acc += arow[j] * brow[j];
      crow[kk] += acc;
    }
  }
}

// C(k x c) += A(r x k)^T * B(r x c).
template <class T>
void matmul_at_acc(const T* a, const T* b, T* c, std::size_t r, std::size_t k, std::size_t cc) {
  for (std::size_t i = 0; i < r; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * cc;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = arow[kk];
      if (aik == T(0)) continue;
      T* crow = c + kk * cc;
      for (std::size_t j = 0; j < cc; ++j) crow[j] += aik * brow[j];
    }
  }
}

template <class T>
T gelu_value(T x) {
  const double xd = static_cast<double>(x);
  return static_cast<T>(0.5 * xd * (1.0 + std::erf(xd / std::numbers::sqrt2)));
}

template <class T>
T gelu_derivative(T x) {
  const double xd = static_cast<double>(x);
  const double phi = std::exp(-0.5 * xd * xd) / std::sqrt(2.0 * std::numbers::pi);
  const double big_phi = 0.5 * (1.0 + std::erf(xd / std::numbers::sqrt2));
  return static_cast<T>(big_phi + xd * phi);
}

}  // namespace detail

template <class T>
class Tape {
 public:
  using NodeId = std::size_t;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  const Tensor<T>& value(NodeId id) const { return nodes_[id].value; }
  const Tensor<T>& grad(NodeId id) const { return nodes_[id].grad; }

  // Parameter leaf: the current value is copied in; after backward() the
  // accumulated gradient is added into *grad_sink.
  NodeId leaf(const Tensor<T>& value, Tensor<T>* grad_sink) {
    NodeId id = push(value, "leaf");
    nodes_[id].grad_sink = grad_sink;
    return id;
  }

  NodeId constant(Tensor<T> value) {
    NodeId id = push(std::move(value), "constant");
    nodes_[id].differentiable = false;
    return id;
  }

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor<T>& av = nodes_[a].value;
    const Tensor<T>& bv = nodes_[b].value;
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
      throw std::invalid_argument("matmul: incompatible shapes");
    Tensor<T> out({av.rows(), bv.cols()});
    detail::matmul_acc(av.data.data(), bv.data.data(), out.data.data(), av.rows(), av.cols(),
                       bv.cols());
    NodeId id = push(std::move(out), "matmul");
    record(id, [this, id, a, b] {
      const Tensor<T>& d = nodes_[id].grad;
      const Tensor<T>& av2 = nodes_[a].value;
      const Tensor<T>& bv2 = nodes_[b].value;
      // dA += dC * B^T ; dB += A^T * dC
      detail::matmul_bt_acc(d.data.data(), bv2.data.data(), nodes_[a].grad.data.data(), d.rows(),
                            d.cols(), av2.cols());
      detail::matmul_at_acc(av2.data.data(), d.data.data(), nodes_[b].grad.data.data(),
                            av2.rows(), av2.cols(), d.cols());
    });
    return id;
  }

  NodeId add(NodeId a, NodeId b) {
    const Tensor<T>& av = nodes_[a].value;
    const Tensor<T>& bv = nodes_[b].value;
    if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    NodeId id = push(std::move(out), "add");
    record(id, [this, id, a, b] {
      const Tensor<T>& d = nodes_[id].grad;
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        nodes_[a].grad.data[i] += d.data[i];
        nodes_[b].grad.data[i] += d.data[i];
      }
    });
    return id;
  }

  // x (r x c) + bias (c) broadcast over rows.
  NodeId add_rowvec(NodeId x, NodeId bias) {
    const Tensor<T>& xv = nodes_[x].value;
    const Tensor<T>& bv = nodes_[bias].value;
    if (xv.rank() != 2 || bv.numel() != xv.cols())
      throw std::invalid_argument("add_rowvec: bias length must equal columns");
    Tensor<T> out = xv;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv.data[j];
    NodeId id = push(std::move(out), "add_rowvec");
    record(id, [this, id, x, bias] {
      const Tensor<T>& d = nodes_[id].grad;
      Tensor<T>& dx = nodes_[x].grad;
      Tensor<T>& db = nodes_[bias].grad;
      for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < d.cols(); ++j) {
          dx(i, j) += d(i, j);
          db.data[j] += d(i, j);
        }
    });
    return id;
  }

  // Repeats a (l x c) tensor `repeats` times along rows -> (repeats*l x c).
  NodeId tile_rows(NodeId x, std::size_t repeats) {
    const Tensor<T>& xv = nodes_[x].value;
    if (xv.rank() != 2 || repeats == 0) throw std::invalid_argument("tile_rows: bad arguments");
    Tensor<T> out({xv.rows() * repeats, xv.cols()});
    for (std::size_t r = 0; r < repeats; ++r)
      std::copy(xv.data.begin(), xv.data.end(), out.data.begin() + r * xv.numel());
    NodeId id = push(std::move(out), "tile_rows");
    record(id, [this, id, x, repeats] {
      const Tensor<T>& d = nodes_[id].grad;
      Tensor<T>& dx = nodes_[x].grad;
      const std::size_t n = dx.numel();
      for (std::size_t r = 0; r < repeats; ++r)
        for (std::size_t i = 0; i < n; ++i) dx.data[i] += d.data[r * n + i];
    });
    return id;
  }

  NodeId scale(NodeId a, T factor) {
    Tensor<T> out = nodes_[a].value;
    for (auto& v : out.data) v *= factor;
    NodeId id = push(std::move(out), "scale");
    record(id, [this, id, a, factor] {
      const Tensor<T>& d = nodes_[id].grad;
      for (std::size_t i = 0; i < d.data.size(); ++i) nodes_[a].grad.data[i] += factor * d.data[i];
    });
    return id;
  }

  NodeId relu(NodeId a) {
    Tensor<T> out = nodes_[a].value;
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    NodeId id = push(std::move(out), "relu");
    record(id, [this, id, a] {
      const Tensor<T>& d = nodes_[id].grad;
      const Tensor<T>& av = nodes_[a].value;
      for (std::size_t i = 0; i < d.data.size(); ++i)
        if (av.data[i] > T(0)) nodes_[a].grad.data[i] += d.data[i];
    });
    return id;
  }

  NodeId gelu(NodeId a) {
    Tensor<T> out = nodes_[a].value;
    for (auto& v : out.data) v = detail::gelu_value(v);
    NodeId id = push(std::move(out), "gelu");
    record(id, [this, id, a] {
      const Tensor<T>& d = nodes_[id].grad;
      const Tensor<T>& av = nodes_[a].value;
      const T sign = testhooks::negate_gelu_grad() ? T(-1) : T(1);
      for (std::size_t i = 0; i < d.data.size(); ++i)
        nodes_[a].grad.data[i] += sign * detail::gelu_derivative(av.data[i]) * d.data[i];
    });
    return id;
  }

  NodeId sigmoid(NodeId a) {
    Tensor<T> out = nodes_[a].value;
    for (auto& v : out.data) {
      const double x = static_cast<double>(v);
      v = static_cast<T>(x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x)));
    }
    NodeId id = push(std::move(out), "sigmoid");
    record(id, [this, id, a] {
      const Tensor<T>& d = nodes_[id].grad;
      const Tensor<T>& yv = nodes_[id].value;
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        const T y = yv.data[i];
        nodes_[a].grad.data[i] += y * (T(1) - y) * d.data[i];
      }
    });
    return id;
  }

  NodeId transpose(NodeId a) {
    const Tensor<T>& av = nodes_[a].value;
    if (av.rank() != 2) throw std::invalid_argument("transpose: rank-2 only");
    Tensor<T> out({av.cols(), av.rows()});
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
    NodeId id = push(std::move(out), "transpose");
    record(id, [this, id, a] {
      const Tensor<T>& d = nodes_[id].grad;
      Tensor<T>& da = nodes_[a].grad;
      for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < d.cols(); ++j) da(j, i) += d(i, j);
    });
    return id;
  }

  // Per-row layer norm over the last axis with learned gain/bias.
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias) {
    const Tensor<T>& xv = nodes_[x].value;
    const Tensor<T>& gv = nodes_[gain].value;
    const Tensor<T>& bv = nodes_[bias].value;
    const std::size_t r = xv.rows(), c = xv.cols();
    if (xv.rank() != 2 || gv.numel() != c || bv.numel() != c)
      throw std::invalid_argument("layer_norm: gain/bias length must equal columns");
    Tensor<T> out({r, c});
    auto xhat = std::make_shared<Tensor<T>>(Tensor<T>({r, c}));
    auto rstd = std::make_shared<std::vector<T>>(r);
    for (std::size_t i = 0; i < r; ++i) {
      double mean = 0;
      for (std::size_t j = 0; j < c; ++j) mean += static_cast<double>(xv(i, j));
      mean /= static_cast<double>(c);
      double var = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const double dxj = static_cast<double>(xv(i, j)) - mean;
        var += dxj * dxj;
      }
      var /= static_cast<double>(c);
      const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
      (*rstd)[i] = static_cast<T>(rs);
      for (std::size_t j = 0; j < c; ++j) {
        const T xh = static_cast<T>((static_cast<double>(xv(i, j)) - mean) * rs);
        (*xhat)(i, j) = xh;
        out(i, j) = xh * gv.data[j] + bv.data[j];
      }
    }
    NodeId id = push(std::move(out), "layer_norm");
    record(id, [this, id, x, gain, bias, xhat, rstd] {
      const Tensor<T>& d = nodes_[id].grad;
      const Tensor<T>& gv2 = nodes_[gain].value;
      Tensor<T>& dx = nodes_[x].grad;
      Tensor<T>& dg = nodes_[gain].grad;
      Tensor<T>& db = nodes_[bias].grad;
      const std::size_t r = d.rows(), c = d.cols();
      for (std::size_t i = 0; i < r; ++i) {
        double sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (std::size_t j = 0; j < c; ++j) {
          const double dxh = static_cast<double>(d(i, j)) * static_cast<double>(gv2.data[j]);
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * static_cast<double>((*xhat)(i, j));
          dg.data[j] += d(i, j) * (*xhat)(i, j);
          db.data[j] += d(i, j);
        }
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j) {
          const double dxh = static_cast<double>(d(i, j)) * static_cast<double>(gv2.data[j]);
          const double xh = static_cast<double>((*xhat)(i, j));
          dx(i, j) += static_cast<T>(static_cast<double>((*rstd)[i]) *
                                     (dxh - inv_c * sum_dxhat - xh * inv_c * sum_dxhat_xhat));
        }
      }
    });
    return id;
  }

  // Softmax along `axis` of a rank-2 tensor (1 = per row, 0 = per column).
  NodeId softmax(NodeId a, int axis = 1) {
    if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
    if (axis == 0) return transpose(softmax(transpose(a), 1));
    const Tensor<T>& av = nodes_[a].value;
    if (av.rank() != 2) throw std::invalid_argument("softmax: rank-2 only");
    const std::size_t r = av.rows(), c = av.cols();
    Tensor<T> out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
      double mx = -HUGE_VAL;
      for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(av(i, j)));
      double denom = 0;
      for (std::size_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(av(i, j)) - mx);
      for (std::size_t j = 0; j < c; ++j)
        out(i, j) = static_cast<T>(std::exp(static_cast<double>(av(i, j)) - mx) / denom);
    }
    NodeId id = push(std::move(out), "softmax");
    record(id, [this, id, a] {
      const Tensor<T>& d = nodes_[id].grad;
      const Tensor<T>& y = nodes_[id].value;
      Tensor<T>& da = nodes_[a].grad;
      for (std::size_t i = 0; i < d.rows(); ++i) {
        double dot = 0;
        for (std::size_t j = 0; j < d.cols(); ++j)
          dot += static_cast<double>(d(i, j)) * static_cast<double>(y(i, j));
        for (std::size_t j = 0; j < d.cols(); ++j)
          da(i, j) += static_cast<T>(static_cast<double>(y(i, j)) *
                                     (static_cast<double>(d(i, j)) - dot));
      }
    });
    return id;
  }

  // Gathers rows of `table` at `indices` -> (|indices| x d).
  NodeId embedding_lookup(NodeId table, std::vector<std::size_t> indices) {
    const Tensor<T>& tv = nodes_[table].value;
    if (tv.rank() != 2) throw std::invalid_argument("embedding_lookup: table must be rank 2");
    for (std::size_t idx : indices)
      if (idx >= tv.rows()) throw std::invalid_argument("embedding_lookup: index out of range");
    const std::size_t c = tv.cols();
    Tensor<T> out({indices.size(), c});
    for (std::size_t i = 0; i < indices.size(); ++i)
      std::copy_n(tv.data.begin() + indices[i] * c, c, out.data.begin() + i * c);
    NodeId id = push(std::move(out), "embedding_lookup");
    record(id, [this, id, table, indices = std::move(indices)] {
      const Tensor<T>& d = nodes_[id].grad;
      Tensor<T>& dt = nodes_[table].grad;
      const std::size_t c = d.cols();
      for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) dt(indices[i], j) += d(i, j);
    });
    return id;
  }

  // Concatenation of rank-2 tensors along rows (axis 0) or columns (axis 1).
  NodeId concat(const std::vector<NodeId>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
    const std::size_t fixed =
        axis == 0 ? nodes_[parts[0]].value.cols() : nodes_[parts[0]].value.rows();
    std::size_t total = 0;
    for (NodeId p : parts) {
      const Tensor<T>& v = nodes_[p].value;
      if (v.rank() != 2 || (axis == 0 ? v.cols() : v.rows()) != fixed)
        throw std::invalid_argument("concat: incompatible shapes");
      total += axis == 0 ? v.rows() : v.cols();
    }
    Tensor<T> out(axis == 0 ? std::vector<std::size_t>{total, fixed}
                            : std::vector<std::size_t>{fixed, total});
    std::size_t at = 0;
    for (NodeId p : parts) {
      const Tensor<T>& v = nodes_[p].value;
      if (axis == 0) {
        std::copy(v.data.begin(), v.data.end(), out.data.begin() + at * fixed);
        at += v.rows();
      } else {
        for (std::size_t i = 0; i < v.rows(); ++i)
          std::copy_n(v.data.begin() + i * v.cols(), v.cols(),
                      out.data.begin() + i * total + at);
        at += v.cols();
      }
    }
    NodeId id = push(std::move(out), "concat");
    record(id, [this, id, parts, axis] {
      const Tensor<T>& d = nodes_[id].grad;
      std::size_t at = 0;
      for (NodeId p : parts) {
        Tensor<T>& dp = nodes_[p].grad;
        if (axis == 0) {
          for (std::size_t i = 0; i < dp.numel(); ++i)
            dp.data[i] += d.data[at * d.cols() + i];
          at += dp.rows();
        } else {
          for (std::size_t i = 0; i < dp.rows(); ++i)
            for (std::size_t j = 0; j < dp.cols(); ++j) dp(i, j) += d(i, at + j);
          at += dp.cols();
        }
      }
    });
    return id;
  }

  // Mean over all elements -> scalar.
  NodeId mean(NodeId a) {
    const Tensor<T>& av = nodes_[a].value;
    if (av.numel() == 0) throw std::invalid_argument("mean: empty input");
    double acc = 0;
    for (const T& v : av.data) acc += static_cast<double>(v);
    Tensor<T> out({1});
    out.data[0] = static_cast<T>(acc / static_cast<double>(av.numel()));
    NodeId id = push(std::move(out), "mean");
    record(id, [this, id, a] {
      const T g = nodes_[id].grad.data[0];
      Tensor<T>& da = nodes_[a].grad;
      const T w = g / static_cast<T>(da.numel());
      for (auto& v : da.data) v += w;
    });
    return id;
  }

  // Multi-head self-attention over groups of `window` consecutive rows.
  // q, k, v are (W*window x d); each window attends only within itself.
  // If probs_out is non-null it receives the (W*heads*window x window)
  // attention matrix stack for inspection.
  NodeId windowed_attention(NodeId q, NodeId k, NodeId v, std::size_t window, std::size_t heads,
                            Tensor<T>* probs_out = nullptr) {
    const Tensor<T>& qv = nodes_[q].value;
    const Tensor<T>& kv = nodes_[k].value;
    const Tensor<T>& vv = nodes_[v].value;
    const std::size_t rows = qv.rows(), d = qv.cols();
    if (!qv.same_shape(kv) || !qv.same_shape(vv))
      throw std::invalid_argument("windowed_attention: q/k/v shape mismatch");
    if (window == 0 || rows % window != 0)
      throw std::invalid_argument("windowed_attention: rows must be a multiple of window");
    if (heads == 0 || d % heads != 0)
      throw std::invalid_argument("windowed_attention: d must be divisible by heads");
    const std::size_t n_windows = rows / window;
    const std::size_t dh = d / heads;
    const T alpha = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    auto probs = std::make_shared<Tensor<T>>(
        Tensor<T>({n_windows * heads * window, window}));
    Tensor<T> out({rows, d});

    for (std::size_t w = 0; w < n_windows; ++w) {
      const std::size_t base = w * window;
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        T* p = probs->data.data() + (w * heads + h) * window * window;
        for (std::size_t i = 0; i < window; ++i) {
          // scores then softmax in place
          double mx = -HUGE_VAL;
          for (std::size_t j = 0; j < window; ++j) {
            double s = 0;
            const T* qi = &qv(base + i, off);
            const T* kj = &kv(base + j, off);
            for (std::size_t t = 0; t < dh; ++t)
              s += static_cast<double>(qi[t]) * static_cast<double>(kj[t]);
            s *= static_cast<double>(alpha);
            p[i * window + j] = static_cast<T>(s);
            mx = std::max(mx, s);
          }
          double denom = 0;
          for (std::size_t j = 0; j < window; ++j)
            denom += std::exp(static_cast<double>(p[i * window + j]) - mx);
          for (std::size_t j = 0; j < window; ++j)
            p[i * window + j] = static_cast<T>(
                std::exp(static_cast<double>(p[i * window + j]) - mx) / denom);
          T* oi = &out(base + i, off);
          for (std::size_t j = 0; j < window; ++j) {
            const T pij = p[i * window + j];
            const T* vj = &vv(base + j, off);
            for (std::size_t t = 0; t < dh; ++t) oi[t] += pij * vj[t];
          }
        }
      }
    }
    if (probs_out) *probs_out = *probs;

    NodeId id = push(std::move(out), "windowed_attention");
    record(id, [this, id, q, k, v, window, heads, probs, alpha] {
      const Tensor<T>& d_out = nodes_[id].grad;
      const Tensor<T>& qv2 = nodes_[q].value;
      const Tensor<T>& kv2 = nodes_[k].value;
      const Tensor<T>& vv2 = nodes_[v].value;
      Tensor<T>& dq = nodes_[q].grad;
      Tensor<T>& dk = nodes_[k].grad;
      Tensor<T>& dv = nodes_[v].grad;
      const std::size_t d = qv2.cols();
      const std::size_t dh = d / heads;
      const std::size_t n_windows = qv2.rows() / window;
      std::vector<double> dp(window), ds(window);
      for (std::size_t w = 0; w < n_windows; ++w) {
        const std::size_t base = w * window;
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t off = h * dh;
          const T* p = probs->data.data() + (w * heads + h) * window * window;
          for (std::size_t i = 0; i < window; ++i) {
            const T* doi = &d_out(base + i, off);
            // dV += P^T dO  (scatter row i's contribution)
            for (std::size_t j = 0; j < window; ++j) {
              const T pij = p[i * window + j];
              T* dvj = &dv(base + j, off);
              for (std::size_t t = 0; t < dh; ++t) dvj[t] += pij * doi[t];
            }
            // dP = dO V^T ; dS = P o (dP - sum(dP o P))
            double dot = 0;
            for (std::size_t j = 0; j < window; ++j) {
              const T* vj = &vv2(base + j, off);
              double acc = 0;
              for (std::size_t t = 0; t < dh; ++t)
                acc += static_cast<double>(doi[t]) * static_cast<double>(vj[t]);
              dp[j] = acc;
              dot += acc * static_cast<double>(p[i * window + j]);
            }
            for (std::size_t j = 0; j < window; ++j)
              ds[j] = static_cast<double>(p[i * window + j]) * (dp[j] - dot) *
                      static_cast<double>(alpha);
            // dQ_i += sum_j dS_ij K_j ; dK_j += dS_ij Q_i
            T* dqi = &dq(base + i, off);
            const T* qi = &qv2(base + i, off);
            for (std::size_t j = 0; j < window; ++j) {
              const T dsij = static_cast<T>(ds[j]);
              const T* kj = &kv2(base + j, off);
              T* dkj = &dk(base + j, off);
              for (std::size_t t = 0; t < dh; ++t) {
                dqi[t] += dsij * kj[t];
                dkj[t] += dsij * qi[t];
              }
            }
          }
        }
      }
    });
    return id;
  }

  // Weighted binary cross-entropy over probabilities p in (0,1):
  //   -(1/B) sum_i [ w1 y_i log p_i + w0 (1-y_i) log(1-p_i) ]
  // with p clamped to [eps, 1-eps]. Accumulates in double.
  NodeId wce_loss(NodeId p, std::vector<std::uint8_t> labels, T w0, T w1) {
    const Tensor<T>& pv = nodes_[p].value;
    if (pv.numel() != labels.size()) throw std::invalid_argument("wce_loss: length mismatch");
    if (pv.numel() == 0) throw std::invalid_argument("wce_loss: empty batch");
    if (!(w0 > T(0)) || !(w1 > T(0)))
      throw std::invalid_argument("wce_loss: class weights must be positive");
    const double eps = kProbClampEps;
    double acc = 0;
    for (std::size_t i = 0; i < pv.numel(); ++i) {
      const double pc =
          std::min(1.0 - eps, std::max(eps, static_cast<double>(pv.data[i])));
      acc += labels[i] ? static_cast<double>(w1) * std::log(pc)
                       : static_cast<double>(w0) * std::log(1.0 - pc);
    }
    Tensor<T> out({1});
    out.data[0] = static_cast<T>(-acc / static_cast<double>(pv.numel()));
    NodeId id = push(std::move(out), "wce_loss");
    record(id, [this, id, p, labels = std::move(labels), w0, w1] {
      const double g = static_cast<double>(nodes_[id].grad.data[0]);
      const Tensor<T>& pv2 = nodes_[p].value;
      Tensor<T>& dp = nodes_[p].grad;
      const double eps = kProbClampEps;
      const double inv_b = 1.0 / static_cast<double>(pv2.numel());
      for (std::size_t i = 0; i < pv2.numel(); ++i) {
        const double pi = static_cast<double>(pv2.data[i]);
        if (pi <= eps || pi >= 1.0 - eps) continue;  // clamp region: zero slope
        const double term = labels[i] ? -static_cast<double>(w1) / pi
                                      : static_cast<double>(w0) / (1.0 - pi);
        dp.data[i] += static_cast<T>(g * inv_b * term);
      }
    });
    return id;
  }

  // Reverse sweep from a scalar root; flushes leaf gradients into their sinks.
  void backward(NodeId root) {
    if (!grad_enabled_) throw std::logic_error("backward: tape built without gradients");
    if (nodes_[root].value.numel() != 1)
      throw std::invalid_argument("backward: root must be scalar");
    nodes_[root].grad.data[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;)
      if (nodes_[i].back) nodes_[i].back();
    for (Node& node : nodes_)
      if (node.grad_sink) {
        if (!node.grad_sink->same_shape(node.grad))
          throw std::invalid_argument("backward: grad sink shape mismatch");
        for (std::size_t i = 0; i < node.grad.data.size(); ++i)
          node.grad_sink->data[i] += node.grad.data[i];
      }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void()> back;
    Tensor<T>* grad_sink = nullptr;
    bool differentiable = true;
  };

  NodeId push(Tensor<T> value, const char* op) {
    check_finite(value, op);
    Node node;
    node.value = std::move(value);
    if (grad_enabled_) node.grad = Tensor<T>::zeros(node.value.shape);
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
  }

  template <class F>
  void record(NodeId id, F&& back) {
    if (grad_enabled_) nodes_[id].back = std::forward<F>(back);
  }

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// --------------------------------------------------------------------------
// Gradient checking against central finite differences.

template <class T>
struct ParamRef {
  Tensor<T>* value;
  Tensor<T>* grad;
};

// run(with_grad): rebuilds the forward pass against the current parameter
// values and returns the scalar loss; when with_grad it must also run
// backward so gradients land in the ParamRef sinks.
//
// Returns the max over sampled coordinates of
//   |g_fd - g_tape| / max(|g_fd|, |g_tape|, 1e-8).
template <class T>
double gradcheck(const std::function<double(bool with_grad)>& run,
                 std::span<const ParamRef<T>> params, double eps,
                 std::size_t max_coords_per_param = 24, std::uint64_t seed = 0) {
  if (eps < 1e-4 || eps > 1e-2)
    throw std::invalid_argument("gradcheck: eps must lie in [1e-4, 1e-2]");
  for (const auto& p : params) p.grad->fill(T(0));
  run(true);
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad->data);

  rng::Engine eng(seed);
  double max_rel = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& theta = *params[pi].value;
    std::vector<std::size_t> coords;
    if (theta.numel() <= max_coords_per_param) {
      coords.resize(theta.numel());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      coords = rng::sample_without_replacement(theta.numel(), max_coords_per_param, eng);
    }
    for (std::size_t ci : coords) {
      const T saved = theta.data[ci];
      theta.data[ci] = saved + static_cast<T>(eps);
      const double f_plus = run(false);
      theta.data[ci] = saved - static_cast<T>(eps);
      const double f_minus = run(false);
      theta.data[ci] = saved;
      const double fd = (f_plus - f_minus) / (2.0 * eps);
      const double an = static_cast<double>(analytic[pi][ci]);
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - an) / denom);
    }
  }
  return max_rel;
}

}  // namespace primelearn::nd
