#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "noisymix/errors.hpp"
#include "noisymix/tensor.hpp"

namespace noisymix {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seedable random stream. All transforms (uniform, normal, gamma, beta,
/// dirichlet, permutation) are implemented here rather than through
/// std::*_distribution so that a given seed produces the same draw sequence
/// on every platform; the mt19937_64 bit stream itself is standardized.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  /// Independent stream for a worker, derived from (master seed, worker id).
  static RngStream for_worker(std::uint64_t master_seed, std::uint64_t worker_id) {
    return RngStream(splitmix64(master_seed ^ splitmix64(worker_id + 1)));
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via the polar method (no trig, deterministic stream use).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 boosted through
  /// Gamma(shape+1) * U^{1/shape}.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw parameter_error("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform_positive();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_positive();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0))
      throw parameter_error("beta: shape parameters must be positive");
    const double ga = gamma(a);
    const double gb = gamma(b);
    return ga / (ga + gb);
  }

  std::vector<double> dirichlet(double alpha, std::size_t k) {
    if (!(alpha > 0.0)) throw parameter_error("dirichlet: alpha must be positive");
    if (k < 2) throw parameter_error("dirichlet: k must be >= 2");
    std::vector<double> w(k);
    double sum = 0.0;
    for (auto& v : w) {
      v = gamma(alpha);
      sum += v;
    }
    for (auto& v : w) v /= sum;
    return w;
  }

  std::size_t uniform_index(std::size_t n) {
    // Rejection-free enough at desk scale; modulo bias is < 2^-53 here.
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Fisher-Yates over 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

  Tensor normal_tensor(std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = normal();
    return t;
  }

  /// Zero-mean unit-variance uniform on (-sqrt(3), sqrt(3)).
  double uniform_unitvar() { return uniform(-std::sqrt(3.0), std::sqrt(3.0)); }

 private:
  double uniform_positive() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace noisymix
