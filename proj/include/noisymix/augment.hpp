#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "noisymix/errors.hpp"
#include "noisymix/image.hpp"
#include "noisymix/rng.hpp"

namespace noisymix {

enum class AugOp {
  rotate,
  translate_x,
  translate_y,
  shear_x,
  shear_y,
  autocontrast,
  equalize,
  posterize,
  solarize,
};

inline AugOp aug_op_from_string(const std::string& s) {
  if (s == "rotate") return AugOp::rotate;
  if (s == "translate_x") return AugOp::translate_x;
  if (s == "translate_y") return AugOp::translate_y;
  if (s == "shear_x") return AugOp::shear_x;
  if (s == "shear_y") return AugOp::shear_y;
  if (s == "autocontrast") return AugOp::autocontrast;
  if (s == "equalize") return AugOp::equalize;
  if (s == "posterize") return AugOp::posterize;
  if (s == "solarize") return AugOp::solarize;
  throw config_error("unknown augmentation op: " + s);
}

inline std::string to_string(AugOp op) {
  switch (op) {
    case AugOp::rotate: return "rotate";
    case AugOp::translate_x: return "translate_x";
    case AugOp::translate_y: return "translate_y";
    case AugOp::shear_x: return "shear_x";
    case AugOp::shear_y: return "shear_y";
    case AugOp::autocontrast: return "autocontrast";
    case AugOp::equalize: return "equalize";
    case AugOp::posterize: return "posterize";
    default: return "solarize";
  }
}

inline std::vector<AugOp> default_op_set() {
  return {AugOp::rotate,     AugOp::translate_x, AugOp::translate_y,
          AugOp::shear_x,    AugOp::shear_y,     AugOp::autocontrast,
          AugOp::equalize,   AugOp::posterize,   AugOp::solarize};
}

/// Parameters of the stochastic augmentation chain. The mixing weight m is
/// drawn from Beta(alpha_aug, m_beta); m_beta defaults to alpha_aug, giving
/// the symmetric Beta(alpha, alpha). Raising alpha_aug with m_beta = 1
/// concentrates m near 1 (weaker augmentation).
struct AugPolicy {
  std::vector<AugOp> op_set = default_op_set();
  std::size_t width = 3;
  std::size_t depth = 3;
  double alpha_aug = 1.0;
  double m_beta = -1.0;  // < 0: use alpha_aug
  double severity_lo = 0.1;
  double severity_hi = 0.7;

  void validate() const {
    if (op_set.empty()) throw config_error("aug policy: op set must be nonempty");
    if (width < 1 || depth < 1) throw config_error("aug policy: width, depth >= 1");
    if (!(alpha_aug > 0.0)) throw config_error("aug policy: alpha_aug > 0");
    if (severity_lo < 0.0 || severity_hi > 1.0 || severity_lo > severity_hi)
      throw config_error("aug policy: severity range must be within [0,1]");
  }

  double mix_beta() const { return m_beta > 0.0 ? m_beta : alpha_aug; }
};

// Severity -> parameter maps (AugMix-style ranges, linear in severity):
// rotate up to 30 degrees, translate up to side/3, shear up to 0.3,
// posterize 8 -> 4 bits, solarize threshold 1 -> 0.3.
inline constexpr double kMaxRotateDeg = 30.0;
inline constexpr double kMaxShear = 0.3;
inline constexpr double kTranslateFrac = 1.0 / 3.0;

/// Inverse-mapped affine warp with bilinear sampling, zero padding, rotation
/// about the image center. Coefficients map output coords to source coords.
inline RasterImage affine_warp(const RasterImage& img, double a, double b, double c,
                               double d, double tx, double ty) {
  RasterImage out(img.height, img.width, img.channels);
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      const double sx = a * dx + b * dy + cx + tx;
      const double sy = c * dx + d * dy + cy + ty;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double wx = sx - fx, wy = sy - fy;
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      for (std::size_t ch = 0; ch < img.channels; ++ch) {
        auto sample = [&](long yy, long xx) -> double {
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(img.height) ||
              xx >= static_cast<long>(img.width))
            return 0.0;
          return img.at(ch, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
        };
        const double v = (1 - wy) * ((1 - wx) * sample(y0, x0) + wx * sample(y0, x0 + 1)) +
                         wy * ((1 - wx) * sample(y0 + 1, x0) + wx * sample(y0 + 1, x0 + 1));
        out.at(ch, y, x) = v;
      }
    }
  }
  out.clamp();
  return out;
}

inline RasterImage autocontrast_op(const RasterImage& img) {
  RasterImage out = img;
  for (std::size_t ch = 0; ch < img.channels; ++ch) {
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < img.plane(); ++i) {
      const double v = img.pixels[ch * img.plane() + i];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) continue;
    for (std::size_t i = 0; i < img.plane(); ++i) {
      double& v = out.pixels[ch * img.plane() + i];
      v = (v - lo) / (hi - lo);
    }
  }
  out.clamp();
  return out;
}

inline RasterImage equalize_op(const RasterImage& img) {
  RasterImage out = img;
  constexpr int kBins = 256;
  for (std::size_t ch = 0; ch < img.channels; ++ch) {
    std::array<std::size_t, kBins> hist{};
    auto bin_of = [](double v) {
      int b = static_cast<int>(v * 255.0 + 0.5);
      return std::min(kBins - 1, std::max(0, b));
    };
    for (std::size_t i = 0; i < img.plane(); ++i)
      hist[static_cast<std::size_t>(bin_of(img.pixels[ch * img.plane() + i]))]++;
    std::array<double, kBins> cdf{};
    double acc = 0.0;
    double first = -1.0;
    for (int b = 0; b < kBins; ++b) {
      acc += static_cast<double>(hist[static_cast<std::size_t>(b)]);
      cdf[static_cast<std::size_t>(b)] = acc;
      if (first < 0.0 && hist[static_cast<std::size_t>(b)] > 0) first = acc;
    }
    const double total = acc;
    if (total - first < 1e-12) continue;  // constant channel
    for (std::size_t i = 0; i < img.plane(); ++i) {
      double& v = out.pixels[ch * img.plane() + i];
      v = (cdf[static_cast<std::size_t>(bin_of(v))] - first) / (total - first);
    }
  }
  out.clamp();
  return out;
}

inline RasterImage posterize_op(const RasterImage& img, double severity) {
  const int bits = 8 - static_cast<int>(std::round(severity * 4.0));
  if (bits >= 8) return img;  // identity at severity 0
  RasterImage out = img;
  const double levels = static_cast<double>((1 << bits) - 1);
  for (auto& v : out.pixels) v = std::floor(v * levels + 0.5) / levels;
  out.clamp();
  return out;
}

inline RasterImage solarize_op(const RasterImage& img, double severity) {
  const double threshold = 1.0 - 0.7 * severity;
  RasterImage out = img;
  for (auto& v : out.pixels)
    if (v > threshold) v = 1.0 - v;
  out.clamp();
  return out;
}

/// Apply one op at the given severity in [0,1]. Geometric ops displace in the
/// positive direction; chain sampling flips signs.
inline RasterImage apply_op(const RasterImage& img, AugOp op, double severity) {
  if (severity < 0.0 || severity > 1.0)
    throw config_error("apply_op: severity must be in [0,1]");
  switch (op) {
    case AugOp::rotate: {
      const double th = severity * kMaxRotateDeg * M_PI / 180.0;
      // inverse rotation
      return affine_warp(img, std::cos(th), std::sin(th), -std::sin(th), std::cos(th),
                         0.0, 0.0);
    }
    case AugOp::translate_x: {
      const double t = severity * kTranslateFrac * static_cast<double>(img.width);
      return affine_warp(img, 1, 0, 0, 1, -t, 0.0);
    }
    case AugOp::translate_y: {
      const double t = severity * kTranslateFrac * static_cast<double>(img.height);
      return affine_warp(img, 1, 0, 0, 1, 0.0, -t);
    }
    case AugOp::shear_x:
      return affine_warp(img, 1, severity * kMaxShear, 0, 1, 0.0, 0.0);
    case AugOp::shear_y:
      return affine_warp(img, 1, 0, severity * kMaxShear, 1, 0.0, 0.0);
    case AugOp::autocontrast:
      return autocontrast_op(img);
    case AugOp::equalize:
      return equalize_op(img);
    case AugOp::posterize:
      return posterize_op(img, severity);
    case AugOp::solarize:
      return solarize_op(img, severity);
  }
  throw config_error("apply_op: unknown op");
}

inline bool is_geometric(AugOp op) {
  switch (op) {
    case AugOp::rotate:
    case AugOp::translate_x:
    case AugOp::translate_y:
    case AugOp::shear_x:
    case AugOp::shear_y:
      return true;
    default:
      return false;
  }
}

namespace detail {

/// One chain: composition of 1..depth randomly drawn ops. Geometric severities
/// get a random sign by mirroring the image coordinate direction, implemented
/// by warping with negated parameters via a pre-negation severity trick.
inline RasterImage run_chain(const RasterImage& img, const AugPolicy& policy,
                             RngStream& rng) {
  RasterImage cur = img;
  const std::size_t d = 1 + rng.uniform_index(policy.depth);
  for (std::size_t k = 0; k < d; ++k) {
    const AugOp op = policy.op_set[rng.uniform_index(policy.op_set.size())];
    const double sev = rng.uniform(policy.severity_lo, policy.severity_hi);
    const bool flip = is_geometric(op) && rng.uniform() < 0.5;
    if (!flip) {
      cur = apply_op(cur, op, sev);
    } else {
      // negative direction: apply the mirrored warp directly
      switch (op) {
        case AugOp::rotate: {
          const double th = -sev * kMaxRotateDeg * M_PI / 180.0;
          cur = affine_warp(cur, std::cos(th), std::sin(th), -std::sin(th),
                            std::cos(th), 0.0, 0.0);
          break;
        }
        case AugOp::translate_x: {
          const double t = sev * kTranslateFrac * static_cast<double>(cur.width);
          cur = affine_warp(cur, 1, 0, 0, 1, t, 0.0);
          break;
        }
        case AugOp::translate_y: {
          const double t = sev * kTranslateFrac * static_cast<double>(cur.height);
          cur = affine_warp(cur, 1, 0, 0, 1, 0.0, t);
          break;
        }
        case AugOp::shear_x:
          cur = affine_warp(cur, 1, -sev * kMaxShear, 0, 1, 0.0, 0.0);
          break;
        case AugOp::shear_y:
          cur = affine_warp(cur, 1, 0, -sev * kMaxShear, 1, 0.0, 0.0);
          break;
        default:
          cur = apply_op(cur, op, sev);
      }
    }
  }
  return cur;
}

}  // namespace detail

/// Deterministic recombination m x + (1-m) sum_i w_i C_i(x).
inline RasterImage recombine(const RasterImage& img, double m,
                             const std::vector<double>& w,
                             const std::vector<RasterImage>& chains) {
  if (w.size() != chains.size())
    throw dimension_error("recombine: weight/chain count mismatch");
  RasterImage out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < chains.size(); ++i) {
    if (!chains[i].same_shape(img)) throw dimension_error("recombine: chain shape");
    for (std::size_t k = 0; k < out.pixels.size(); ++k)
      out.pixels[k] += w[i] * chains[i].pixels[k];
  }
  for (std::size_t k = 0; k < out.pixels.size(); ++k)
    out.pixels[k] = m * img.pixels[k] + (1.0 - m) * out.pixels[k];
  out.clamp();
  return out;
}

/// A(x) = m x + (1-m) sum_i w_i C_i(x); m ~ Beta(alpha_aug, m_beta),
/// w ~ Dirichlet(alpha_aug), each C_i a random composition of ops.
inline RasterImage augment_and_mix(const RasterImage& img, const AugPolicy& policy,
                                   RngStream& rng) {
  policy.validate();
  const double m = rng.beta(policy.alpha_aug, policy.mix_beta());
  std::vector<double> w = policy.width >= 2
                              ? rng.dirichlet(policy.alpha_aug, policy.width)
                              : std::vector<double>{1.0};
  std::vector<RasterImage> chains;
  chains.reserve(policy.width);
  for (std::size_t i = 0; i < policy.width; ++i)
    chains.push_back(detail::run_chain(img, policy, rng));
  return recombine(img, m, w, chains);
}

/// Returns (A(x), dx) with A(x) = x + dx exactly (the first element is the
/// recomposition, so the identity holds bitwise).
inline std::pair<RasterImage, RasterImage> perturbation_decomposition(
    const RasterImage& img, const AugPolicy& policy, RngStream& rng) {
  RasterImage augmented = augment_and_mix(img, policy, rng);
  RasterImage delta(img.height, img.width, img.channels);
  for (std::size_t k = 0; k < img.pixels.size(); ++k)
    delta.pixels[k] = augmented.pixels[k] - img.pixels[k];
  RasterImage recomposed = img;
  for (std::size_t k = 0; k < img.pixels.size(); ++k)
    recomposed.pixels[k] = img.pixels[k] + delta.pixels[k];
  return {std::move(recomposed), std::move(delta)};
}

}  // namespace noisymix
