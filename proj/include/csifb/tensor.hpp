#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace csifb {

/// Dense n-dimensional real tensor in row-major order, with a gradient
/// buffer of the same shape. All training math runs in 64-bit reals.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;  // values
  std::vector<double> g;  // accumulated gradient, zero-initialized

  Tensor() = default;

  explicit Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
    const std::size_t n = count(shape);
    v.assign(n, 0.0);
    g.assign(n, 0.0);
  }

  Tensor(std::vector<int> shape_, std::vector<double> values)
      : shape(std::move(shape_)), v(std::move(values)) {
    if (count(shape) != v.size())
      throw std::invalid_argument("Tensor: shape/value count mismatch");
    g.assign(v.size(), 0.0);
  }

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t size() const { return v.size(); }

  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace csifb
