// Shape-tagged row-major tensor of doubles. Carries images (H,W,C),
// spectrograms (F,T) and any weight blocks that get serialized.

#ifndef KAAP_TENSOR_HPP
#define KAAP_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "kaap/errors.hpp"

namespace kaap {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;  // row-major

  Tensor() = default;

  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (element_count(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string());
    }
  }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = element_count(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  static Tensor full(std::vector<std::size_t> s, double value) {
    std::size_t n = element_count(s);
    return Tensor(std::move(s), std::vector<double>(n, value));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t dim(std::size_t axis) const {
    if (axis >= shape.size()) throw ShapeError("tensor axis out of range");
    return shape[axis];
  }

  // 2-D access (rank >= 2; trailing axes flattened into the column stride).
  double& at(std::size_t r, std::size_t c) {
    return data[r * stride(0) + c];
  }
  double at(std::size_t r, std::size_t c) const {
    return data[r * stride(0) + c];
  }

  // 3-D access for (H,W,C) images.
  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data[(r * shape[1] + c) * shape[2] + ch];
  }
  double at(std::size_t r, std::size_t c, std::size_t ch) const {
    return data[(r * shape[1] + c) * shape[2] + ch];
  }

  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < shape.size(); ++a) s *= shape[a];
    return s;
  }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool all_zero() const {
    for (double v : data) {
      if (v != 0.0) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  std::string shape_string() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ",";
      os << shape[i];
    }
    os << ")";
    return os.str();
  }
};

}  // namespace kaap

#endif  // KAAP_TENSOR_HPP
