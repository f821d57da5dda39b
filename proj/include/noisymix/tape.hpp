#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "noisymix/errors.hpp"
#include "noisymix/tensor.hpp"

namespace noisymix {

class Tape;

/// Handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  bool valid() const { return tape != nullptr && idx >= 0; }
};

/// Append-only reverse-mode tape. Backward emits new tape nodes (the adjoint
/// program is built from the same op set), so gradients are themselves
/// differentiable and Hessian-vector products reduce to a second backward
/// pass over the directional derivative.
class Tape {
 public:
  enum class Op {
    leaf,
    constant,
    add,
    sub,
    neg,
    mul,
    div,
    mul_scalar,
    add_scalar,
    matmul,
    transpose,
    rowsum,
    colsum,
    broadcast_col,
    broadcast_row,
    broadcast_scalar,
    sum,
    log_floored,
    safe_recip,
    exp_op,
    tanh_op,
    softplus_op,
    sigmoid_op,
    relu_op,
    detach,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double payload = 0.0;
    Tensor value;
    bool requires_grad = false;
  };

  static constexpr double kLogFloor = 1e-12;

  std::size_t size() const { return nodes_.size(); }

  const Tensor& value(Var v) const { return nodes_[v.idx].value; }

  Var leaf(Tensor t) { return push(Op::leaf, -1, -1, 0.0, std::move(t), true); }

  Var constant(Tensor t) { return push(Op::constant, -1, -1, 0.0, std::move(t), false); }

  Var scalar_const(double v) { return constant(Tensor::scalar(v)); }

  Var add(Var a, Var b) {
    check_same_shape(value(a), value(b), "tape add");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += value(b).data[i];
    return push(Op::add, a.idx, b.idx, 0.0, std::move(out), grad(a) || grad(b));
  }

  Var sub(Var a, Var b) {
    check_same_shape(value(a), value(b), "tape sub");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= value(b).data[i];
    return push(Op::sub, a.idx, b.idx, 0.0, std::move(out), grad(a) || grad(b));
  }

  Var neg(Var a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = -v;
    return push(Op::neg, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  Var mul(Var a, Var b) {
    check_same_shape(value(a), value(b), "tape mul");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= value(b).data[i];
    return push(Op::mul, a.idx, b.idx, 0.0, std::move(out), grad(a) || grad(b));
  }

  Var div(Var a, Var b) {
    check_same_shape(value(a), value(b), "tape div");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] /= value(b).data[i];
    return push(Op::div, a.idx, b.idx, 0.0, std::move(out), grad(a) || grad(b));
  }

  Var mul_scalar(Var a, double s) {
    Tensor out = value(a);
    for (auto& v : out.data) v *= s;
    return push(Op::mul_scalar, a.idx, -1, s, std::move(out), grad(a));
  }

  Var add_scalar(Var a, double s) {
    Tensor out = value(a);
    for (auto& v : out.data) v += s;
    return push(Op::add_scalar, a.idx, -1, s, std::move(out), grad(a));
  }

  Var matmul_op(Var a, Var b) {
    Tensor out = matmul(value(a), value(b));
    return push(Op::matmul, a.idx, b.idx, 0.0, std::move(out), grad(a) || grad(b));
  }

  Var transpose_op(Var a) {
    const Tensor& x = value(a);
    if (x.ndim() != 2) throw dimension_error("tape transpose: needs 2-d");
    Tensor out({x.cols(), x.rows()});
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
    return push(Op::transpose, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  /// (B,K) -> (B,1)
  Var rowsum(Var a) {
    const Tensor& x = value(a);
    if (x.ndim() != 2) throw dimension_error("tape rowsum: needs 2-d");
    Tensor out({x.rows(), 1});
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) s += x.at(i, j);
      out.at(i, 0) = s;
    }
    return push(Op::rowsum, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  /// (B,K) -> (1,K)
  Var colsum(Var a) {
    const Tensor& x = value(a);
    if (x.ndim() != 2) throw dimension_error("tape colsum: needs 2-d");
    Tensor out({1, x.cols()});
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out.at(0, j) += x.at(i, j);
    return push(Op::colsum, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  /// (B,1) -> (B,K)
  Var broadcast_col(Var a, std::size_t k) {
    const Tensor& x = value(a);
    if (x.ndim() != 2 || x.cols() != 1)
      throw dimension_error("tape broadcast_col: needs (B,1)");
    Tensor out({x.rows(), k});
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < k; ++j) out.at(i, j) = x.at(i, 0);
    return push(Op::broadcast_col, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  /// (1,K) -> (B,K)
  Var broadcast_row(Var a, std::size_t b) {
    const Tensor& x = value(a);
    if (x.ndim() != 2 || x.rows() != 1)
      throw dimension_error("tape broadcast_row: needs (1,K)");
    Tensor out({b, x.cols()});
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(0, j);
    return push(Op::broadcast_row, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  /// {1} -> arbitrary shape
  Var broadcast_scalar(Var a, std::vector<std::size_t> shape) {
    const Tensor& x = value(a);
    if (x.numel() != 1) throw dimension_error("tape broadcast_scalar: needs scalar");
    Tensor out = Tensor::full(std::move(shape), x.data[0]);
    return push(Op::broadcast_scalar, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  Var sum(Var a) {
    double s = 0.0;
    for (double v : value(a).data) s += v;
    return push(Op::sum, a.idx, -1, 0.0, Tensor::scalar(s), grad(a));
  }

  /// log(max(x, floor)); probabilities are floored so 0*log(0) terms stay finite.
  Var log_floored(Var a, double floor = kLogFloor) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::log(std::max(v, floor));
    return push(Op::log_floored, a.idx, -1, floor, std::move(out), grad(a));
  }

  /// x > floor ? 1/x : 0 (the adjoint of log_floored; closed under itself).
  Var safe_recip(Var a, double floor = kLogFloor) {
    Tensor out = value(a);
    for (auto& v : out.data) v = v > floor ? 1.0 / v : 0.0;
    return push(Op::safe_recip, a.idx, -1, floor, std::move(out), grad(a));
  }

  Var exp(Var a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::exp(v);
    return push(Op::exp_op, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  Var tanh(Var a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::tanh(v);
    return push(Op::tanh_op, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  Var softplus(Var a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = softplus_val(v);
    return push(Op::softplus_op, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  Var sigmoid(Var a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = sigmoid_val(v);
    return push(Op::sigmoid_op, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  Var relu(Var a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return push(Op::relu_op, a.idx, -1, 0.0, std::move(out), grad(a));
  }

  Var detach(Var a) {
    return push(Op::detach, a.idx, -1, 0.0, value(a), false);
  }

  static double softplus_val(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }

  static double sigmoid_val(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

  /// Gradients of a scalar root with respect to every reachable node.
  struct Gradients {
    Tape* tape = nullptr;
    std::vector<int> grad_idx;  // node index -> gradient node index (-1: none)

    bool has(Var v) const {
      return v.idx < static_cast<int>(grad_idx.size()) && grad_idx[v.idx] >= 0;
    }

    /// Gradient as a Var (differentiable). Zero tensor if the root does not
    /// depend on v.
    Var at(Var v) const {
      if (has(v)) return Var{tape, grad_idx[v.idx]};
      return tape->constant(Tensor::zeros(tape->value(v).shape));
    }

    Tensor tensor(Var v) const {
      if (has(v)) return tape->value(Var{tape, grad_idx[v.idx]});
      return Tensor::zeros(tape->value(v).shape);
    }
  };

  Gradients backward(Var root) {
    if (value(root).numel() != 1)
      throw contract_error("backward: root must be scalar");
    const int n = root.idx + 1;
    std::vector<int> gidx(nodes_.size(), -1);
    std::vector<char> needed(n, 0);
    mark_needed(root.idx, needed);

    Var seed = constant(Tensor::scalar(1.0));
    gidx.resize(nodes_.size(), -1);
    gidx[root.idx] = seed.idx;

    for (int i = root.idx; i >= 0; --i) {
      if (!needed[i] || gidx[i] < 0) continue;
      // Copy the descriptor fields: emitting adjoint nodes reallocates nodes_.
      const Op op = nodes_[i].op;
      const int ai = nodes_[i].a;
      const int bi = nodes_[i].b;
      const double payload = nodes_[i].payload;
      Var g{this, gidx[i]};
      emit_vjp(i, op, ai, bi, payload, g, gidx);
    }
    return Gradients{this, std::move(gidx)};
  }

  /// Hessian-vector product of a scalar root w.r.t. one leaf: differentiate
  /// the directional derivative sum(grad . direction).
  Tensor hvp(Var root, Var wrt, const Tensor& direction) {
    check_same_shape(value(wrt), direction, "hvp direction");
    Gradients g1 = backward(root);
    if (!g1.has(wrt)) return Tensor::zeros(value(wrt).shape);
    Var g = g1.at(wrt);
    if (!nodes_[g.idx].requires_grad) return Tensor::zeros(value(wrt).shape);
    Var dir = constant(direction);
    Var s = sum(mul(g, dir));
    Gradients g2 = backward(s);
    return g2.tensor(wrt);
  }

 private:
  bool grad(Var v) const { return nodes_[v.idx].requires_grad; }

  Var push(Op op, int a, int b, double payload, Tensor value, bool rg) {
    check_finite(value, "tape op output");
    Node nd;
    nd.op = op;
    nd.a = a;
    nd.b = b;
    nd.payload = payload;
    nd.value = std::move(value);
    nd.requires_grad = rg;
    nodes_.push_back(std::move(nd));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
  }

  void mark_needed(int root, std::vector<char>& needed) {
    std::vector<int> stack{root};
    needed[root] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const Node& nd = nodes_[i];
      if (nd.op == Op::detach) continue;
      for (int p : {nd.a, nd.b}) {
        if (p >= 0 && nodes_[p].requires_grad && !needed[p]) {
          needed[p] = 1;
          stack.push_back(p);
        }
      }
    }
  }

  void accumulate(int target, Var contribution, std::vector<int>& gidx) {
    if (!nodes_[target].requires_grad) return;
    if (gidx.size() < nodes_.size()) gidx.resize(nodes_.size(), -1);
    if (gidx[target] < 0) {
      gidx[target] = contribution.idx;
    } else {
      Var acc = add(Var{this, gidx[target]}, contribution);
      if (gidx.size() < nodes_.size()) gidx.resize(nodes_.size(), -1);
      gidx[target] = acc.idx;
    }
  }

  void emit_vjp(int i, Op op, int ai, int bi, double payload, Var g,
                std::vector<int>& gidx) {
    Var a{this, ai};
    Var b{this, bi};
    switch (op) {
      case Op::leaf:
      case Op::constant:
      case Op::detach:
        break;
      case Op::add:
        accumulate(ai, g, gidx);
        accumulate(bi, g, gidx);
        break;
      case Op::sub:
        accumulate(ai, g, gidx);
        accumulate(bi, neg(g), gidx);
        break;
      case Op::neg:
        accumulate(ai, neg(g), gidx);
        break;
      case Op::mul:
        if (nodes_[ai].requires_grad) accumulate(ai, mul(g, b), gidx);
        if (nodes_[bi].requires_grad) accumulate(bi, mul(g, a), gidx);
        break;
      case Op::div:
        if (nodes_[ai].requires_grad) accumulate(ai, div(g, b), gidx);
        if (nodes_[bi].requires_grad)
          accumulate(bi, neg(div(mul(g, Var{this, i}), b)), gidx);
        break;
      case Op::mul_scalar:
        accumulate(ai, mul_scalar(g, payload), gidx);
        break;
      case Op::add_scalar:
        accumulate(ai, g, gidx);
        break;
      case Op::matmul:
        if (nodes_[ai].requires_grad)
          accumulate(ai, matmul_op(g, transpose_op(b)), gidx);
        if (nodes_[bi].requires_grad)
          accumulate(bi, matmul_op(transpose_op(a), g), gidx);
        break;
      case Op::transpose:
        accumulate(ai, transpose_op(g), gidx);
        break;
      case Op::rowsum:
        accumulate(ai, broadcast_col(g, value(a).cols()), gidx);
        break;
      case Op::colsum:
        accumulate(ai, broadcast_row(g, value(a).rows()), gidx);
        break;
      case Op::broadcast_col:
        accumulate(ai, rowsum(g), gidx);
        break;
      case Op::broadcast_row:
        accumulate(ai, colsum(g), gidx);
        break;
      case Op::broadcast_scalar:
        accumulate(ai, sum(g), gidx);
        break;
      case Op::sum:
        accumulate(ai, broadcast_scalar(g, value(a).shape), gidx);
        break;
      case Op::log_floored:
        accumulate(ai, mul(g, safe_recip(a, payload)), gidx);
        break;
      case Op::safe_recip: {
        Var r{this, i};
        accumulate(ai, neg(mul(g, mul(r, r))), gidx);
        break;
      }
      case Op::exp_op:
        accumulate(ai, mul(g, Var{this, i}), gidx);
        break;
      case Op::tanh_op: {
        Var t{this, i};
        accumulate(ai, mul(g, add_scalar(neg(mul(t, t)), 1.0)), gidx);
        break;
      }
      case Op::softplus_op:
        accumulate(ai, mul(g, sigmoid(a)), gidx);
        break;
      case Op::sigmoid_op: {
        Var s{this, i};
        accumulate(ai, mul(g, mul(s, add_scalar(neg(s), 1.0))), gidx);
        break;
      }
      case Op::relu_op: {
        Tensor mask = value(a);
        for (auto& v : mask.data) v = v > 0.0 ? 1.0 : 0.0;
        accumulate(ai, mul(g, constant(std::move(mask))), gidx);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
};

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }
inline Var operator*(double s, Var a) { return a.tape->mul_scalar(a, s); }

/// log(sum(exp(z), rows)) with the row max pulled out as a constant; exact
/// derivatives since lse is invariant to the shift. Returns (B,1).
inline Var logsumexp_rows(Var z) {
  Tape& t = *z.tape;
  const Tensor& zv = t.value(z);
  Tensor m({zv.rows(), 1});
  for (std::size_t i = 0; i < zv.rows(); ++i) {
    double mx = zv.at(i, 0);
    for (std::size_t j = 1; j < zv.cols(); ++j) mx = std::max(mx, zv.at(i, j));
    m.at(i, 0) = mx;
  }
  Var c = t.constant(std::move(m));
  Var shifted = t.sub(z, t.broadcast_col(c, zv.cols()));
  Var s = t.rowsum(t.exp(shifted));
  return t.add(t.log_floored(s), c);
}

/// Row-wise softmax probabilities.
inline Var softmax_rows(Var z) {
  Tape& t = *z.tape;
  Var lse = logsumexp_rows(z);
  return t.exp(t.sub(z, t.broadcast_col(lse, t.value(z).cols())));
}

}  // namespace noisymix
