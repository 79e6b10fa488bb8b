#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace sl {

// Dense row-major tensor. The last dimension is the "column" axis for all
// matrix-shaped operations in the graph layer.
template <typename T>
struct Tensor {
  std::vector<long> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<long> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(count(shape)), T(0));
  }
  Tensor(std::vector<long> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    assert(static_cast<long>(data.size()) == count(shape));
  }

  static long count(const std::vector<long>& s) {
    long n = 1;
    for (long d : s) n *= d;
    return n;
  }

  long size() const { return static_cast<long>(data.size()); }
  long last_dim() const { return shape.empty() ? 1 : shape.back(); }
  long rows() const { return last_dim() == 0 ? 0 : size() / last_dim(); }

  static Tensor zeros(std::vector<long> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<long> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  template <typename Rng>
  static Tensor randn(std::vector<long> s, Rng& rng, T stddev = T(1)) {
    Tensor t(std::move(s));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& x : t.data) x = static_cast<T>(dist(rng)) * stddev;
    return t;
  }

  Tensor reshaped(std::vector<long> s) const {
    assert(count(s) == size());
    return Tensor(std::move(s), data);
  }

  T& operator[](long i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](long i) const { return data[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (const T& x : data)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

}  // namespace sl
