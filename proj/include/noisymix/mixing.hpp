#pragma once

#include <cmath>
#include <vector>

#include "noisymix/errors.hpp"
#include "noisymix/rng.hpp"
#include "noisymix/tape.hpp"
#include "noisymix/tensor.hpp"

namespace noisymix {

enum class NoiseFamily { gaussian, uniform };

/// Parameters of the mixing/noise distributions. epsilon_scale rescales
/// sigma -> eps*sigma and (1-lambda) -> eps*(1-lambda); 1.0 leaves the
/// transform unscaled (training), smaller values drive the small-parameter
/// regime used by the theory lab.
struct NoiseConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double sigma_add = 0.1;
  double sigma_mult = 0.1;
  NoiseFamily family = NoiseFamily::gaussian;
  double epsilon_scale = 1.0;

  void validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0))
      throw parameter_error("noise config: alpha, beta must be positive");
    if (sigma_add < 0.0 || sigma_mult < 0.0)
      throw parameter_error("noise config: sigma_add, sigma_mult must be >= 0");
    if (epsilon_scale < 0.0)
      throw parameter_error("noise config: epsilon_scale must be >= 0");
  }
};

/// One joint sample driving a mixed minibatch step: mixing coefficient,
/// additive/multiplicative noise fields, the layer to mix at, and the pairing
/// permutation of batch rows.
struct MixDraw {
  double lambda = 1.0;
  Tensor xi_add, xi_mult;
  std::size_t layer = 0;
  std::vector<std::size_t> permutation;
};

inline double sample_beta(double alpha, double beta, RngStream& rng) {
  return rng.beta(alpha, beta);
}

inline std::vector<double> sample_dirichlet(double alpha, std::size_t k, RngStream& rng) {
  return rng.dirichlet(alpha, k);
}

/// The mixture (alpha/(alpha+beta)) Beta(alpha+1, beta)
/// + (beta/(alpha+beta)) Beta(beta+1, alpha); the lambda law of the
/// single-sum reformulation of the mixed losses.
inline double sample_lambda_tilde(double alpha, double beta, RngStream& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw parameter_error("lambda_tilde: alpha, beta must be positive");
  const double u = rng.uniform();
  if (u < alpha / (alpha + beta)) return rng.beta(alpha + 1.0, beta);
  return rng.beta(beta + 1.0, alpha);
}

/// E[lambda^k] under Beta(a,b).
inline double beta_moment(double a, double b, int k) {
  double m = 1.0;
  for (int t = 0; t < k; ++t) m *= (a + t) / (a + b + t);
  return m;
}

/// E[(1-lambda)^k] under Beta(a,b) ((1-lambda) ~ Beta(b,a)).
inline double beta_one_minus_moment(double a, double b, int k) {
  return beta_moment(b, a, k);
}

/// E[(1-lambda)^k] under the lambda_tilde mixture.
inline double lambda_tilde_one_minus_moment(double alpha, double beta, int k) {
  const double wa = alpha / (alpha + beta);
  return wa * beta_one_minus_moment(alpha + 1.0, beta, k) +
         (1.0 - wa) * beta_one_minus_moment(beta + 1.0, alpha, k);
}

inline Tensor sample_noise_tensor(const std::vector<std::size_t>& shape,
                                  NoiseFamily family, RngStream& rng) {
  Tensor t(shape);
  if (family == NoiseFamily::gaussian) {
    for (auto& v : t.data) v = rng.normal();
  } else {
    for (auto& v : t.data) v = rng.uniform_unitvar();
  }
  return t;
}

/// Draw with a fixed mixing layer; xi fields take the given representation
/// shape.
inline MixDraw sample_mix_draw_at(const NoiseConfig& cfg,
                                  const std::vector<std::size_t>& rep_shape,
                                  std::size_t layer, std::size_t batch,
                                  RngStream& rng) {
  cfg.validate();
  MixDraw d;
  d.lambda = rng.beta(cfg.alpha, cfg.beta);
  d.xi_add = sample_noise_tensor(rep_shape, cfg.family, rng);
  d.xi_mult = sample_noise_tensor(rep_shape, cfg.family, rng);
  d.layer = layer;
  d.permutation = rng.permutation(batch);
  return d;
}

/// Joint draw for one step: the mixing layer is sampled uniformly from the
/// mixable set first, then lambda ~ Beta(alpha,beta) and the xi fields shaped
/// like that layer's representation, plus a pairing permutation.
inline MixDraw sample_mix_draw(const NoiseConfig& cfg,
                               const std::vector<std::size_t>& layer_widths,
                               const std::vector<std::size_t>& mixable_layers,
                               std::size_t batch, RngStream& rng) {
  if (mixable_layers.empty())
    throw config_error("sample_mix_draw: no mixable layers");
  const std::size_t layer = mixable_layers[rng.uniform_index(mixable_layers.size())];
  if (layer >= layer_widths.size())
    throw config_error("sample_mix_draw: mixable layer out of range");
  return sample_mix_draw_at(cfg, {batch, layer_widths[layer]}, layer, batch, rng);
}

struct EffectiveMix {
  double lambda;      // 1 - eps*(1-lambda)
  double sigma_add;   // eps*sigma_add
  double sigma_mult;  // eps*sigma_mult
};

inline EffectiveMix effective_mix(double lambda, const NoiseConfig& cfg) {
  const double eps = cfg.epsilon_scale;
  return EffectiveMix{1.0 - eps * (1.0 - lambda), eps * cfg.sigma_add,
                      eps * cfg.sigma_mult};
}

/// M_{lambda,xi}(x, x') = (1 + sigma_mult xi_mult) .* (lambda x + (1-lambda) x')
/// + sigma_add xi_add, after epsilon rescaling.
inline Tensor mix(const Tensor& x, const Tensor& x_prime, const MixDraw& draw,
                  const NoiseConfig& cfg) {
  check_same_shape(x, x_prime, "mix");
  check_same_shape(x, draw.xi_add, "mix xi_add");
  check_same_shape(x, draw.xi_mult, "mix xi_mult");
  const EffectiveMix em = effective_mix(draw.lambda, cfg);
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double m = em.lambda * x.data[i] + (1.0 - em.lambda) * x_prime.data[i];
    out.data[i] = (1.0 + em.sigma_mult * draw.xi_mult.data[i]) * m +
                  em.sigma_add * draw.xi_add.data[i];
  }
  return out;
}

/// Tape version; lambda and the xi fields enter as constants, so gradients
/// flow through x and x' only.
inline Var mix_tape(Tape& tape, Var x, Var x_prime, const MixDraw& draw,
                    const NoiseConfig& cfg) {
  check_same_shape(tape.value(x), draw.xi_add, "mix_tape xi");
  const EffectiveMix em = effective_mix(draw.lambda, cfg);
  Tensor mult_field = draw.xi_mult;
  for (auto& v : mult_field.data) v = 1.0 + em.sigma_mult * v;
  Tensor add_field = draw.xi_add;
  for (auto& v : add_field.data) v *= em.sigma_add;
  Var m = tape.add(tape.mul_scalar(x, em.lambda),
                   tape.mul_scalar(x_prime, 1.0 - em.lambda));
  return tape.add(tape.mul(m, tape.constant(std::move(mult_field))),
                  tape.constant(std::move(add_field)));
}

/// Single-sum (vicinal) form of the mixed sample:
///   x_i + eps * [ (1 + eps sigma_mult xi_mult) .* (1-lambda)(x_r - x_i)
///                 + sigma_mult xi_mult .* x_i + sigma_add xi_add ].
/// The caller draws lambda from the lambda_tilde mixture.
inline Tensor reformulated_perturbation(const Tensor& x_i, const Tensor& x_r,
                                        const MixDraw& draw, const NoiseConfig& cfg) {
  check_same_shape(x_i, x_r, "reformulated_perturbation");
  check_same_shape(x_i, draw.xi_add, "reformulated_perturbation xi");
  const double eps = cfg.epsilon_scale;
  const double one_minus_lambda = 1.0 - draw.lambda;
  Tensor out = x_i;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double mixup = one_minus_lambda * (x_r.data[i] - x_i.data[i]);
    const double e = (1.0 + eps * cfg.sigma_mult * draw.xi_mult.data[i]) * mixup +
                     cfg.sigma_mult * draw.xi_mult.data[i] * x_i.data[i] +
                     cfg.sigma_add * draw.xi_add.data[i];
    out.data[i] = x_i.data[i] + eps * e;
  }
  return out;
}

/// Mixed soft label M_lambda(y, y') with the effective (rescaled) lambda.
inline Tensor mix_labels(const Tensor& y, const Tensor& y_prime, double lambda,
                         const NoiseConfig& cfg) {
  check_same_shape(y, y_prime, "mix_labels");
  const EffectiveMix em = effective_mix(lambda, cfg);
  Tensor out = y;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] = em.lambda * y.data[i] + (1.0 - em.lambda) * y_prime.data[i];
  return out;
}

/// Apply the pairing permutation to batch rows.
inline Tensor permute_rows(const Tensor& batch, const std::vector<std::size_t>& perm) {
  if (batch.ndim() != 2 || perm.size() != batch.rows())
    throw dimension_error("permute_rows: bad permutation length");
  Tensor out({batch.rows(), batch.cols()});
  for (std::size_t i = 0; i < batch.rows(); ++i)
    for (std::size_t j = 0; j < batch.cols(); ++j)
      out.at(i, j) = batch.at(perm[i], j);
  return out;
}

}  // namespace noisymix
