#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "noisymix/errors.hpp"
#include "noisymix/mixing.hpp"
#include "noisymix/rng.hpp"
#include "noisymix/tape.hpp"
#include "noisymix/tensor.hpp"

namespace noisymix {

enum class Activation { relu, tanh, softplus };

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "softplus") return Activation::softplus;
  throw config_error("unknown activation: " + s);
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    default: return "softplus";
  }
}

/// Fully connected feed-forward network. Layer l maps widths[l] -> widths[l+1];
/// hidden layers apply the activation, the last layer emits raw logits.
/// "Mixable" layers index representation levels: 0 is the input, l >= 1 the
/// post-activation output of hidden layer l.
struct MlpModel {
  std::vector<std::size_t> widths;
  std::vector<Tensor> weights;  // (widths[l], widths[l+1])
  std::vector<Tensor> biases;   // (1, widths[l+1])
  std::vector<Activation> acts;
  std::vector<std::size_t> mixable;

  std::size_t n_layers() const { return weights.size(); }
  std::size_t d_in() const { return widths.front(); }
  std::size_t d_out() const { return widths.back(); }

  bool smooth() const {
    for (auto a : acts)
      if (a == Activation::relu) return false;
    return true;
  }
};

inline MlpModel make_mlp(const std::vector<std::size_t>& widths, Activation act,
                         RngStream& rng) {
  if (widths.size() < 2) throw config_error("mlp: need at least input and output widths");
  MlpModel m;
  m.widths = widths;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
    Tensor w({widths[l], widths[l + 1]});
    for (auto& v : w.data) v = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Tensor({1, widths[l + 1]}));
  }
  m.acts.assign(widths.size() - 2, act);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) m.mixable.push_back(l);
  return m;
}

inline std::size_t param_count(const MlpModel& m) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < m.n_layers(); ++l)
    n += m.weights[l].numel() + m.biases[l].numel();
  return n;
}

template <typename F>
void for_each_param(MlpModel& m, F&& fn) {
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    fn("W" + std::to_string(l), m.weights[l]);
    fn("b" + std::to_string(l), m.biases[l]);
  }
}

template <typename F>
void for_each_param(const MlpModel& m, F&& fn) {
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    fn("W" + std::to_string(l), m.weights[l]);
    fn("b" + std::to_string(l), m.biases[l]);
  }
}

inline void apply_activation(Tensor& t, Activation a) {
  switch (a) {
    case Activation::relu:
      for (auto& v : t.data) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::tanh:
      for (auto& v : t.data) v = std::tanh(v);
      break;
    case Activation::softplus:
      for (auto& v : t.data) v = Tape::softplus_val(v);
      break;
  }
}

inline void check_batch(const MlpModel& m, const Tensor& batch, const char* op) {
  if (batch.ndim() != 2 || batch.cols() != m.d_in())
    throw dimension_error(std::string(op) + ": batch shape " + batch.shape_str() +
                          " does not match model input width " +
                          std::to_string(m.d_in()));
}

/// Plain forward pass (no tape). Logits of shape (B, d_out).
inline Tensor forward(const MlpModel& m, const Tensor& batch) {
  check_batch(m, batch, "forward");
  Tensor h = batch;
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    Tensor z = matmul(h, m.weights[l]);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) z.at(i, j) += m.biases[l].at(0, j);
    if (l + 1 < m.n_layers()) apply_activation(z, m.acts[l]);
    h = std::move(z);
  }
  check_finite(h, "forward logits");
  return h;
}

/// Tape-registered parameters of a model, aligned with for_each_param order.
struct ModelVars {
  std::vector<Var> weights, biases;
  std::vector<Var> flat;  // W0, b0, W1, b1, ...
};

inline ModelVars register_params(Tape& tape, const MlpModel& m) {
  ModelVars mv;
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    mv.weights.push_back(tape.leaf(m.weights[l]));
    mv.biases.push_back(tape.leaf(m.biases[l]));
    mv.flat.push_back(mv.weights.back());
    mv.flat.push_back(mv.biases.back());
  }
  return mv;
}

inline Var activate(Tape& tape, Var z, Activation a) {
  switch (a) {
    case Activation::relu: return tape.relu(z);
    case Activation::tanh: return tape.tanh(z);
    default: return tape.softplus(z);
  }
}

/// Forward pass from an already-registered input Var (grads can flow to the
/// input as well as the parameters).
inline Var forward_tape(Tape& tape, const MlpModel& m, const ModelVars& mv, Var input) {
  Var h = input;
  const std::size_t batch = tape.value(input).rows();
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    Var z = tape.add(tape.matmul_op(h, mv.weights[l]),
                     tape.broadcast_row(mv.biases[l], batch));
    h = (l + 1 < m.n_layers()) ? activate(tape, z, m.acts[l]) : z;
  }
  return h;
}

inline Var forward_tape(Tape& tape, const MlpModel& m, const ModelVars& mv,
                        const Tensor& batch) {
  check_batch(m, batch, "forward_tape");
  return forward_tape(tape, m, mv, tape.constant(batch));
}

inline void check_mixable(const MlpModel& m, std::size_t layer) {
  for (auto l : m.mixable)
    if (l == layer) return;
  throw config_error("forward_mixed: layer " + std::to_string(layer) +
                     " is not mixable");
}

/// Run both batches to draw.layer, apply the noisy mixing transform to the two
/// representations, and continue forward once. Layer 0 mixes the inputs.
inline Tensor forward_mixed(const MlpModel& m, const Tensor& batch_a,
                            const Tensor& batch_b, const MixDraw& draw,
                            const NoiseConfig& cfg) {
  check_batch(m, batch_a, "forward_mixed");
  check_same_shape(batch_a, batch_b, "forward_mixed");
  check_mixable(m, draw.layer);
  Tensor ha = batch_a, hb = batch_b;
  for (std::size_t l = 0; l < draw.layer; ++l) {
    for (Tensor* h : {&ha, &hb}) {
      Tensor z = matmul(*h, m.weights[l]);
      for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) z.at(i, j) += m.biases[l].at(0, j);
      if (l + 1 < m.n_layers()) apply_activation(z, m.acts[l]);
      *h = std::move(z);
    }
  }
  Tensor h = mix(ha, hb, draw, cfg);
  for (std::size_t l = draw.layer; l < m.n_layers(); ++l) {
    Tensor z = matmul(h, m.weights[l]);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) z.at(i, j) += m.biases[l].at(0, j);
    if (l + 1 < m.n_layers()) apply_activation(z, m.acts[l]);
    h = std::move(z);
  }
  check_finite(h, "forward_mixed logits");
  return h;
}

/// Tape version of forward_mixed; gradients flow to the parameters.
inline Var forward_mixed_tape(Tape& tape, const MlpModel& m, const ModelVars& mv,
                              const Tensor& batch_a, const Tensor& batch_b,
                              const MixDraw& draw, const NoiseConfig& cfg) {
  check_batch(m, batch_a, "forward_mixed_tape");
  check_same_shape(batch_a, batch_b, "forward_mixed_tape");
  check_mixable(m, draw.layer);
  const std::size_t batch = batch_a.rows();
  Var ha = tape.constant(batch_a);
  Var hb = tape.constant(batch_b);
  for (std::size_t l = 0; l < draw.layer; ++l) {
    for (Var* h : {&ha, &hb}) {
      Var z = tape.add(tape.matmul_op(*h, mv.weights[l]),
                       tape.broadcast_row(mv.biases[l], batch));
      *h = (l + 1 < m.n_layers()) ? activate(tape, z, m.acts[l]) : z;
    }
  }
  Var h = mix_tape(tape, ha, hb, draw, cfg);
  for (std::size_t l = draw.layer; l < m.n_layers(); ++l) {
    Var z = tape.add(tape.matmul_op(h, mv.weights[l]),
                     tape.broadcast_row(mv.biases[l], batch));
    h = (l + 1 < m.n_layers()) ? activate(tape, z, m.acts[l]) : z;
  }
  return h;
}

}  // namespace noisymix
