#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "qexpand/errors.hpp"

namespace qexpand {

// Dense row-major tensor. Rank is 1 (vectors, scalars as length-1) or 2
// (matrices); that is all the encoder stack needs.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size()) throw ShapeError("tensor: shape/data size mismatch");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = numel_of(s);
    return Tensor{std::move(s), std::vector<T>(n, T(0))};
  }
  static Tensor full(std::vector<std::size_t> s, T v) {
    std::size_t n = numel_of(s);
    return Tensor{std::move(s), std::vector<T>(n, v)};
  }
  static Tensor scalar(T v) { return Tensor{{1}, {v}}; }
  static Tensor vec(std::vector<T> d) {
    std::size_t n = d.size();
    return Tensor{{n}, std::move(d)};
  }
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<T> d) {
    return Tensor{{r, c}, std::move(d)};
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  T item() const {
    if (numel() != 1) throw ShapeError("tensor: item() on non-scalar");
    return data[0];
  }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = static_cast<U>(data[i]);
    return Tensor<U>{shape, std::move(out)};
  }
};

// --- plain (tape-free) numerics shared with the autograd ops ---

// Numerically stable softmax with temperature.
template <typename T>
std::vector<T> softmax(const std::vector<T>& scores, T temperature) {
  if (!(temperature > T(0))) throw ConfigError("softmax: temperature must be positive");
  if (scores.empty()) return {};
  T mx = scores[0];
  for (T s : scores) mx = std::max(mx, s);
  std::vector<T> out(scores.size());
  T sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - mx) / temperature);
    sum += out[i];
  }
  for (T& v : out) v /= sum;
  return out;
}

// Layer normalization over one vector, followed by the affine map gain*y + bias.
template <typename T>
std::vector<T> layer_norm(const std::vector<T>& x, const std::vector<T>& gain,
                          const std::vector<T>& bias, T eps = T(1e-5)) {
  if (gain.size() != x.size() || bias.size() != x.size())
    throw ShapeError("layer_norm: gain/bias length mismatch");
  if (!(eps > T(0))) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t n = x.size();
  T mean = 0;
  for (T v : x) mean += v;
  mean /= T(n);
  T var = 0;
  for (T v : x) var += (v - mean) * (v - mean);
  var /= T(n);
  const T inv = T(1) / std::sqrt(var + eps);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = gain[i] * ((x[i] - mean) * inv) + bias[i];
  return out;
}

template <typename T>
T dot(const std::vector<T>& a, const std::vector<T>& b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T l2_norm(const std::vector<T>& a) {
  return std::sqrt(dot(a, a));
}

}  // namespace qexpand
