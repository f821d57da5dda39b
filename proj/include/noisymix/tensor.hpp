#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "noisymix/errors.hpp"

namespace noisymix {

/// Dense row-major tensor of 64-bit floats. The whole lab runs in double
/// precision; theory verification needs residuals far below float32 noise.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }

  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size())
      throw dimension_error("tensor: shape/data size mismatch");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<std::size_t> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor row(std::initializer_list<double> vals) {
    std::vector<double> d(vals);
    return Tensor({1, d.size()}, std::move(d));
  }

  static Tensor vec(std::vector<double> vals) {
    auto n = vals.size();
    return Tensor({n}, std::move(vals));
  }

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }

  std::size_t rows() const {
    if (shape.size() != 2) throw dimension_error("tensor: rows() needs 2-d");
    return shape[0];
  }
  std::size_t cols() const {
    if (shape.size() != 2) throw dimension_error("tensor: cols() needs 2-d");
    return shape[1];
  }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw dimension_error(std::string(op) + ": shape mismatch " + a.shape_str() +
                          " vs " + b.shape_str());
}

inline void check_finite(const Tensor& t, const char* where) {
  if (!t.all_finite())
    throw numerical_error(std::string("non-finite value in ") + where);
}

inline double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
  return s;
}

inline double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < b.numel(); ++i) out.data[i] += b.data[i];
  return out;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < b.numel(); ++i) out.data[i] -= b.data[i];
  return out;
}

inline Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (auto& v : out.data) v *= s;
  return out;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < b.numel(); ++i) out.data[i] *= b.data[i];
  return out;
}

/// (B,I) x (I,O) -> (B,O)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
    throw dimension_error("matmul: incompatible shapes " + a.shape_str() + " x " +
                          b.shape_str());
  const std::size_t B = a.rows(), I = a.cols(), O = b.cols();
  Tensor out({B, O});
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t k = 0; k < I; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * O];
      double* orow = &out.data[i * O];
      for (std::size_t j = 0; j < O; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

}  // namespace noisymix
