#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace primelearn::nd {

// Raised when an operation produces a non-finite value.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major tensor. Rank 1 or 2 covers everything the model needs.
template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<std::size_t> s, T value) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = value;
    return t;
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T& operator()(std::size_t i) { return data[i]; }
  const T& operator()(std::size_t i) const { return data[i]; }
  T& operator()(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  void fill(T value) {
    for (auto& x : data) x = value;
  }
};

template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (const T& x : t.data)
    if (!std::isfinite(static_cast<double>(x)))
      throw numeric_error(std::string("non-finite value produced by ") + op);
}

// theta <- theta - lr * grad, elementwise.
template <class T>
void sgd_step(Tensor<T>& params, const Tensor<T>& grads, T lr) {
  if (!(lr > T(0))) throw std::invalid_argument("sgd_step: lr must be positive");
  if (!params.same_shape(grads)) throw std::invalid_argument("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < params.data.size(); ++i) params.data[i] -= lr * grads.data[i];
}

}  // namespace primelearn::nd
