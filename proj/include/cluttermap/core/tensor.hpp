#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cluttermap/core/error.hpp"
#include "cluttermap/core/rng.hpp"

namespace cluttermap {

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    require(d >= 0, "tensor dimension must be non-negative, got ", d);
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Shape-carrying real array in row-major order, with an optional gradient
// buffer of identical length.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until ensure_grad()

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(shape_numel(shape), T(0));
  }

  Tensor(std::vector<int> s, std::vector<T> values)
      : shape(std::move(s)), data(std::move(values)) {
    require(data.size() == shape_numel(shape), "tensor data length ",
            data.size(), " does not match shape ", shape_str(shape));
  }

  static Tensor randn(std::vector<int> s, Rng& rng, double sd = 1.0) {
    Tensor t(std::move(s));
    for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, sd));
    return t;
  }

  static Tensor full(std::vector<int> s, T value) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

  std::size_t size() const { return data.size(); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(shape.size()); }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

}  // namespace cluttermap
