#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "noisymix/errors.hpp"
#include "noisymix/mlp.hpp"
#include "noisymix/tensor.hpp"

namespace noisymix {

enum class OptKind { sgd, adam };

inline OptKind opt_from_string(const std::string& s) {
  if (s == "sgd") return OptKind::sgd;
  if (s == "adam") return OptKind::adam;
  throw config_error("unknown optimizer: " + s);
}

/// First-order optimizer state. Gradients are passed in for_each_param order
/// (W0, b0, W1, b1, ...).
struct Optimizer {
  OptKind kind = OptKind::sgd;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Tensor> m, v;
  long t = 0;
};

inline Optimizer make_sgd(double lr) {
  Optimizer o;
  o.kind = OptKind::sgd;
  o.lr = lr;
  return o;
}

inline Optimizer make_adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8) {
  Optimizer o;
  o.kind = OptKind::adam;
  o.lr = lr;
  o.beta1 = beta1;
  o.beta2 = beta2;
  o.eps = eps;
  return o;
}

inline void step(Optimizer& opt, MlpModel& model, const std::vector<Tensor>& grads) {
  std::vector<Tensor*> params;
  std::vector<std::string> names;
  for_each_param(model, [&](const std::string& name, Tensor& p) {
    params.push_back(&p);
    names.push_back(name);
  });
  if (grads.size() != params.size())
    throw dimension_error("step: gradient count " + std::to_string(grads.size()) +
                          " != parameter count " + std::to_string(params.size()));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    check_same_shape(*params[k], grads[k], "step");
    if (!grads[k].all_finite())
      throw numerical_error("step: non-finite gradient for parameter " + names[k]);
  }

  if (opt.kind == OptKind::sgd) {
    for (std::size_t k = 0; k < params.size(); ++k)
      for (std::size_t i = 0; i < params[k]->numel(); ++i)
        params[k]->data[i] -= opt.lr * grads[k].data[i];
    return;
  }

  if (opt.m.empty()) {
    for (auto* p : params) {
      opt.m.push_back(Tensor::zeros(p->shape));
      opt.v.push_back(Tensor::zeros(p->shape));
    }
  }
  opt.t += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k]->numel(); ++i) {
      const double g = grads[k].data[i];
      double& m = opt.m[k].data[i];
      double& v = opt.v[k].data[i];
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      params[k]->data[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

}  // namespace noisymix
