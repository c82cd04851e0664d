#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dib/tensor.hpp"

namespace dib {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape over matrix-valued nodes. Nodes are appended in
/// evaluation order, so a reverse sweep is a valid topological order.
class Tape {
 public:
  /// Receives d(loss)/d(node value) and pushes contributions to parents.
  using Backward = std::function<void(Tape&, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Differentiable input whose gradient can be read back with grad().
  Var leaf(Matrix value);
  /// Parameter bound to a store entry; backward() accumulates into store.grad(path).
  Var param(ParamStore& store, const std::string& path);

  Var push(Matrix value, std::vector<int> parents, Backward backward);

  const Matrix& value(int id) const { return nodes_[id].value; }
  /// Gradient after backward(); zero matrix for nodes the loss does not reach.
  Matrix grad(Var v) const;
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  /// Accumulates into the gradient of node `id` (no-op for constants).
  template <typename Derived>
  void accumulate(int id, const Eigen::DenseBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad.array() += g.derived().array();
  }

  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> parents;
    Backward backward;
    bool needs_grad = false;
    ParamStore* store = nullptr;
    std::string path;
  };
  std::vector<Node> nodes_;
};

// Differentiable operations. All operands must live on the same tape.
Var matmul(Var a, Var b);
/// a (r x c) + b broadcast over rows (b is 1 x c).
Var add_bias(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Elementwise product.
Var operator*(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var tanh(Var a);
Var leaky_relu(Var a, double alpha);
Var exp(Var a);
Var square(Var a);
/// Elementwise clamp; gradient is zero where the bound is active.
Var clamp(Var a, double lo, double hi);
Var softplus(Var a);
Var sum(Var a);
Var mean(Var a);
/// r x c -> r x 1
Var row_sum(Var a);
/// Stabilized log(sum_j exp(a_ij)) per row: r x c -> r x 1.
Var log_sum_exp_rows(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
/// Per-row binary cross-entropy (nats) of logits (r x 1) against 0/1 targets.
Var bce_with_logits(Var logits, const Matrix& targets);

}  // namespace dib
