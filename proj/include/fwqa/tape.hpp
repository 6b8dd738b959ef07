// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/params.hpp"

namespace fwqa {

// Reverse-mode autodiff over dense Eigen values. A Tape owns a growing list
// of nodes; values are computed eagerly at registration, so registration
// order is a topological order and backward() is a single reverse sweep with
// += accumulation at fan-out points. Rank <= 2 covers everything here:
// vectors are n x 1 columns, attention score rows are 1 x n.
//
// A Tape is confined to one thread. Distinct tapes over shared read-only
// Parameter values may run concurrently; backward() writes into
// Parameter::grad, so concurrent backwards need per-worker grad sinks.

enum class Op {
  kConstant,
  kParam,
  kMatMul,
  kAdd,
  kAddColwise,
  kMul,
  kTanh,
  kSigmoid,
  kRelu,
  kScale,
  kLog,
  kConcat,
  kSliceRows,
  kSliceCols,
  kTranspose,
  kSoftmax,
  kSum,
  kPick,
};

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

template <typename Scalar>
class Tape {
 public:
  using M = Mat<Scalar>;
  using V = Var<Scalar>;

  struct Node {
    Op op = Op::kConstant;
    int a = -1, b = -1;
    std::vector<int> list;  // n-ary inputs (concat only)
    M value;
    M grad;
    bool grad_set = false;
    bool needs_grad = false;
    Parameter<Scalar>* param = nullptr;
    Scalar factor = Scalar(0);  // scale
    int i0 = 0, i1 = 0;         // pick indices / slice range / concat axis
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Drop all nodes but keep their storage for reuse.
  void reset() { used_ = 0; }

  std::size_t size() const { return used_; }

  const M& value(V v) const { return node(v.id).value; }

  /// Gradient of the last backward() root w.r.t. this node. Zero matrix of
  /// the node's shape when the node was unreachable.
  M gradient(V v) const {
    const Node& n = node(v.id);
    if (n.grad_set) return n.grad;
    return M::Zero(n.value.rows(), n.value.cols());
  }

  V constant(M value) {
    Node& n = fresh();
    n.op = Op::kConstant;
    n.value = std::move(value);
    n.needs_grad = false;
    return wrap();
  }

  V zeros(Eigen::Index rows, Eigen::Index cols) {
    return constant(M::Zero(rows, cols));
  }

  /// Leaf bound to an external parameter; backward() accumulates into
  /// Parameter::grad.
  V param(Parameter<Scalar>& p) {
    Node& n = fresh();
    n.op = Op::kParam;
    n.value = p.value;
    n.param = &p;
    n.needs_grad = true;
    return wrap();
  }

  V matmul(V a, V b) {
    const M& av = node(a.id).value;
    const M& bv = node(b.id).value;
    if (av.cols() != bv.rows())
      throw ShapeError("matmul: inner dimensions disagree, " + shape_str(av) +
                       " * " + shape_str(bv));
    Node& n = fresh(a, b);
    n.op = Op::kMatMul;
    n.value.noalias() = in(n, 0) * in(n, 1);
    return wrap();
  }

  V add(V a, V b) {
    require_same_shape("add", a, b);
    Node& n = fresh(a, b);
    n.op = Op::kAdd;
    n.value = in(n, 0) + in(n, 1);
    return wrap();
  }

  /// Broadcast-add a column vector to every column of a matrix.
  V add_colwise(V m, V v) {
    const M& mv = node(m.id).value;
    const M& vv = node(v.id).value;
    if (vv.cols() != 1 || vv.rows() != mv.rows())
      throw ShapeError("add_colwise: " + shape_str(mv) + " + column " +
                       shape_str(vv));
    Node& n = fresh(m, v);
    n.op = Op::kAddColwise;
    n.value = in(n, 0).colwise() + in(n, 1).col(0);
    return wrap();
  }

  V mul(V a, V b) {
    require_same_shape("mul", a, b);
    Node& n = fresh(a, b);
    n.op = Op::kMul;
    n.value = in(n, 0).cwiseProduct(in(n, 1));
    return wrap();
  }

  V tanh(V a) {
    Node& n = fresh(a);
    n.op = Op::kTanh;
    n.value = in(n, 0).array().tanh();
    return wrap();
  }

  V sigmoid(V a) {
    Node& n = fresh(a);
    n.op = Op::kSigmoid;
    n.value = (Scalar(1) / (Scalar(1) + (-in(n, 0).array()).exp()));
    return wrap();
  }

  V relu(V a) {
    Node& n = fresh(a);
    n.op = Op::kRelu;
    n.value = in(n, 0).cwiseMax(Scalar(0));
    return wrap();
  }

  V scale(V a, Scalar k) {
    Node& n = fresh(a);
    n.op = Op::kScale;
    n.factor = k;
    n.value = in(n, 0) * k;
    return wrap();
  }

  V log(V a) {
    Node& n = fresh(a);
    n.op = Op::kLog;
    n.value = in(n, 0).array().log();
    return wrap();
  }

  V concat(const std::vector<V>& parts, int axis) {
    if (parts.empty()) throw ArgumentError("concat: no operands");
    if (axis != 0 && axis != 1) throw ArgumentError("concat: axis must be 0 or 1");
    Eigen::Index rows = node(parts[0].id).value.rows();
    Eigen::Index cols = node(parts[0].id).value.cols();
    Eigen::Index total = axis == 0 ? rows : cols;
    for (std::size_t k = 1; k < parts.size(); ++k) {
      const M& pv = node(parts[k].id).value;
      if (axis == 0 ? pv.cols() != cols : pv.rows() != rows)
        throw ShapeError("concat: operand " + std::to_string(k) + " is " +
                         shape_str(pv) + ", expected to match " +
                         shape_str(rows, cols) + " off axis " +
                         std::to_string(axis));
      total += axis == 0 ? pv.rows() : pv.cols();
    }
    Node& n = fresh();
    n.op = Op::kConcat;
    n.i0 = axis;
    n.list.clear();
    n.list.reserve(parts.size());
    bool needs = false;
    for (V p : parts) {
      n.list.push_back(p.id);
      needs = needs || node(p.id).needs_grad;
    }
    n.needs_grad = needs;
    if (axis == 0)
      n.value.resize(total, cols);
    else
      n.value.resize(rows, total);
    Eigen::Index at = 0;
    for (int id : n.list) {
      const M& pv = node(id).value;
      if (axis == 0) {
        n.value.middleRows(at, pv.rows()) = pv;
        at += pv.rows();
      } else {
        n.value.middleCols(at, pv.cols()) = pv;
        at += pv.cols();
      }
    }
    return wrap();
  }

  V slice_rows(V a, int r0, int r1) {
    const M& av = node(a.id).value;
    if (r0 < 0 || r1 > av.rows() || r0 >= r1)
      throw ArgumentError("slice_rows: [" + std::to_string(r0) + ", " +
                          std::to_string(r1) + ") out of " + shape_str(av));
    Node& n = fresh(a);
    n.op = Op::kSliceRows;
    n.i0 = r0;
    n.i1 = r1;
    n.value = in(n, 0).middleRows(r0, r1 - r0);
    return wrap();
  }

  V slice_cols(V a, int c0, int c1) {
    const M& av = node(a.id).value;
    if (c0 < 0 || c1 > av.cols() || c0 >= c1)
      throw ArgumentError("slice_cols: [" + std::to_string(c0) + ", " +
                          std::to_string(c1) + ") out of " + shape_str(av));
    Node& n = fresh(a);
    n.op = Op::kSliceCols;
    n.i0 = c0;
    n.i1 = c1;
    n.value = in(n, 0).middleCols(c0, c1 - c0);
    return wrap();
  }

  V transpose(V a) {
    Node& n = fresh(a);
    n.op = Op::kTranspose;
    n.value = in(n, 0).transpose();
    return wrap();
  }

  /// Numerically stable softmax over a vector (n x 1 or 1 x n).
  V softmax(V a) {
    const M& av = node(a.id).value;
    if (av.rows() != 1 && av.cols() != 1)
      throw ShapeError("softmax: expected a vector, got " + shape_str(av));
    if (av.size() < 1) throw ArgumentError("softmax: empty vector");
    Node& n = fresh(a);
    n.op = Op::kSoftmax;
    Scalar mx = in(n, 0).maxCoeff();
    n.value = (in(n, 0).array() - mx).exp();
    n.value /= n.value.sum();
    return wrap();
  }

  V sum(V a) {
    Node& n = fresh(a);
    n.op = Op::kSum;
    n.value.resize(1, 1);
    n.value(0, 0) = in(n, 0).sum();
    return wrap();
  }

  /// Extract a single entry as a 1x1 scalar node.
  V pick(V a, int i, int j) {
    const M& av = node(a.id).value;
    if (i < 0 || i >= av.rows() || j < 0 || j >= av.cols())
      throw ArgumentError("pick: (" + std::to_string(i) + ", " +
                          std::to_string(j) + ") out of " + shape_str(av));
    Node& n = fresh(a);
    n.op = Op::kPick;
    n.i0 = i;
    n.i1 = j;
    n.value.resize(1, 1);
    n.value(0, 0) = in(n, 0)(i, j);
    return wrap();
  }

  /// Reverse sweep from a scalar root, seeding d(root) = seed. Every
  /// reachable Parameter leaf accumulates seed * d(root)/d(leaf) into its
  /// Parameter::grad; unreachable leaves are left untouched (zero update).
  /// With flush_params = false the leaf gradients stay on the tape (read
  /// them via for_each_param_grad), which keeps concurrent backwards over
  /// shared parameters race-free.
  void backward(V root, Scalar seed = Scalar(1), bool flush_params = true) {
    Node& r = node(root.id);
    if (r.value.size() != 1)
      throw ArgumentError("backward: root must be scalar, got " +
                          shape_str(r.value));
    for (std::size_t k = 0; k <= static_cast<std::size_t>(root.id); ++k)
      nodes_[k].grad_set = false;
    flush_params_ = flush_params;
    accumulate(root.id, M::Constant(1, 1, seed));
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.grad_set || !n.needs_grad) continue;
      propagate(n);
    }
  }

  /// Visit the gradient of every parameter leaf reached by the last
  /// backward(). The same Parameter appears once per binding.
  template <typename F>
  void for_each_param_grad(F&& f) {
    for (std::size_t k = 0; k < used_; ++k) {
      Node& n = nodes_[k];
      if (n.op == Op::kParam && n.grad_set) f(*n.param, n.grad);
    }
  }

 private:
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  const M& in(const Node& n, int which) const {
    return node(which == 0 ? n.a : n.b).value;
  }

  Node& fresh() {
    if (used_ == nodes_.size()) nodes_.emplace_back();
    Node& n = nodes_[used_++];
    n.a = n.b = -1;
    n.param = nullptr;
    n.grad_set = false;
    n.needs_grad = false;
    if (!n.list.empty()) n.list.clear();
    return n;
  }

  Node& fresh(V a) {
    bool needs = node(a.id).needs_grad;
    Node& n = fresh();
    n.a = a.id;
    n.needs_grad = needs;
    return n;
  }

  Node& fresh(V a, V b) {
    bool needs = node(a.id).needs_grad || node(b.id).needs_grad;
    Node& n = fresh();
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = needs;
    return n;
  }

  V wrap() { return V{this, static_cast<int>(used_) - 1}; }

  void require_same_shape(const char* what, V a, V b) const {
    const M& av = node(a.id).value;
    const M& bv = node(b.id).value;
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
      throw ShapeError(std::string(what) + ": shapes disagree, " +
                       shape_str(av) + " vs " + shape_str(bv));
  }

  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = node(id);
    if (!n.needs_grad) return;
    if (n.grad_set) {
      n.grad += g;
    } else {
      n.grad = g;
      n.grad_set = true;
    }
  }

  void propagate(Node& n) {
    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kParam:
        if (flush_params_) n.param->grad += n.grad;
        break;
      case Op::kMatMul:
        accumulate(n.a, n.grad * in(n, 1).transpose());
        accumulate(n.b, in(n, 0).transpose() * n.grad);
        break;
      case Op::kAdd:
        accumulate(n.a, n.grad);
        accumulate(n.b, n.grad);
        break;
      case Op::kAddColwise:
        accumulate(n.a, n.grad);
        accumulate(n.b, n.grad.rowwise().sum());
        break;
      case Op::kMul:
        accumulate(n.a, n.grad.cwiseProduct(in(n, 1)));
        accumulate(n.b, n.grad.cwiseProduct(in(n, 0)));
        break;
      case Op::kTanh:
        accumulate(n.a, (n.grad.array() * (Scalar(1) - n.value.array().square())).matrix());
        break;
      case Op::kSigmoid:
        accumulate(n.a, (n.grad.array() * n.value.array() * (Scalar(1) - n.value.array())).matrix());
        break;
      case Op::kRelu:
        accumulate(n.a, (n.grad.array() * (in(n, 0).array() > Scalar(0)).template cast<Scalar>()).matrix());
        break;
      case Op::kScale:
        accumulate(n.a, n.grad * n.factor);
        break;
      case Op::kLog:
        accumulate(n.a, (n.grad.array() / in(n, 0).array()).matrix());
        break;
      case Op::kConcat: {
        Eigen::Index at = 0;
        for (int id : n.list) {
          const M& pv = node(id).value;
          if (n.i0 == 0) {
            accumulate(id, n.grad.middleRows(at, pv.rows()));
            at += pv.rows();
          } else {
            accumulate(id, n.grad.middleCols(at, pv.cols()));
            at += pv.cols();
          }
        }
        break;
      }
      case Op::kSliceRows: {
        Node& src = node(n.a);
        if (!src.needs_grad) break;
        if (!src.grad_set) {
          src.grad = M::Zero(src.value.rows(), src.value.cols());
          src.grad_set = true;
        }
        src.grad.middleRows(n.i0, n.i1 - n.i0) += n.grad;
        break;
      }
      case Op::kSliceCols: {
        Node& src = node(n.a);
        if (!src.needs_grad) break;
        if (!src.grad_set) {
          src.grad = M::Zero(src.value.rows(), src.value.cols());
          src.grad_set = true;
        }
        src.grad.middleCols(n.i0, n.i1 - n.i0) += n.grad;
        break;
      }
      case Op::kTranspose:
        accumulate(n.a, n.grad.transpose());
        break;
      case Op::kSoftmax: {
        // dL/dx = y .* (g - <g, y>)
        Scalar dot = (n.grad.array() * n.value.array()).sum();
        accumulate(n.a, (n.value.array() * (n.grad.array() - dot)).matrix());
        break;
      }
      case Op::kSum:
        accumulate(n.a, M::Constant(in(n, 0).rows(), in(n, 0).cols(), n.grad(0, 0)));
        break;
      case Op::kPick: {
        Node& src = node(n.a);
        if (!src.needs_grad) break;
        if (!src.grad_set) {
          src.grad = M::Zero(src.value.rows(), src.value.cols());
          src.grad_set = true;
        }
        src.grad(n.i0, n.i1) += n.grad(0, 0);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::size_t used_ = 0;
  bool flush_params_ = true;
};

// Free-function spelling so model code reads like the math it implements.

template <typename S> Var<S> matmul(Var<S> a, Var<S> b) { return a.tape->matmul(a, b); }
template <typename S> Var<S> add(Var<S> a, Var<S> b) { return a.tape->add(a, b); }
template <typename S> Var<S> add_colwise(Var<S> m, Var<S> v) { return m.tape->add_colwise(m, v); }
template <typename S> Var<S> mul(Var<S> a, Var<S> b) { return a.tape->mul(a, b); }
template <typename S> Var<S> tanh(Var<S> a) { return a.tape->tanh(a); }
template <typename S> Var<S> sigmoid(Var<S> a) { return a.tape->sigmoid(a); }
template <typename S> Var<S> relu(Var<S> a) { return a.tape->relu(a); }
template <typename S> Var<S> scale(Var<S> a, S k) { return a.tape->scale(a, k); }
template <typename S> Var<S> log(Var<S> a) { return a.tape->log(a); }
template <typename S> Var<S> concat(const std::vector<Var<S>>& parts, int axis) {
  return parts.at(0).tape->concat(parts, axis);
}
template <typename S> Var<S> slice_rows(Var<S> a, int r0, int r1) { return a.tape->slice_rows(a, r0, r1); }
template <typename S> Var<S> slice_cols(Var<S> a, int c0, int c1) { return a.tape->slice_cols(a, c0, c1); }
template <typename S> Var<S> transpose(Var<S> a) { return a.tape->transpose(a); }
template <typename S> Var<S> softmax(Var<S> a) { return a.tape->softmax(a); }
template <typename S> Var<S> sum(Var<S> a) { return a.tape->sum(a); }
template <typename S> Var<S> pick(Var<S> a, int i, int j) { return a.tape->pick(a, i, j); }

template <typename S> Var<S> operator+(Var<S> a, Var<S> b) { return add(a, b); }
template <typename S> Var<S> operator*(Var<S> a, Var<S> b) { return matmul(a, b); }

}  // namespace fwqa
