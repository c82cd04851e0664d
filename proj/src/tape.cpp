#include "dib/tape.hpp"

#include <cmath>

namespace dib {

const Matrix& Var::value() const {
  if (!tape_) throw ContractError("var: uninitialized handle");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("var: scalar() on a non-scalar node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(ParamStore& store, const std::string& path) {
  const Tensor& t = store.param(path);
  Node n;
  n.value = t.matrix();
  n.needs_grad = true;
  n.store = &store;
  n.path = path;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(Matrix value, std::vector<int> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  n.parents = std::move(parents);
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (nodes_[loss.id()].value.size() != 1)
    throw ContractError("backward: loss must be a scalar node, got " +
                        std::to_string(nodes_[loss.id()].value.rows()) + "x" +
                        std::to_string(nodes_[loss.id()].value.cols()));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss.id()].needs_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) {
      n.backward(*this, n.grad);
    } else if (n.store) {
      n.store->grad(n.path).matrix() += n.grad;
    }
  }
}

namespace {

void same_tape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape())
    throw ContractError(std::string(op) + ": operands on different tapes");
}

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " differ");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() * b.value();
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add_bias(Var a, Var b) {
  same_tape(a, b, "add_bias");
  if (b.rows() != 1 || b.cols() != a.cols())
    throw DimensionError("add_bias: bias must be 1x" + std::to_string(a.cols()));
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value().rowwise() + b.value().row(0);
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

Var operator+(Var a, Var b) {
  same_tape(a, b, "add");
  same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var operator-(Var a, Var b) {
  same_tape(a, b, "sub");
  same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Var operator*(Var a, Var b) {
  same_tape(a, b, "mul");
  same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape()->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var scale(Var a, double s) {
  const int ia = a.id();
  return a.tape()->push(a.value() * s, {ia},
                        [ia, s](Tape& t, const Matrix& g) { t.accumulate(ia, g * s); });
}

Var add_scalar(Var a, double s) {
  const int ia = a.id();
  Matrix out = a.value().array() + s;
  return a.tape()->push(std::move(out), {ia},
                        [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var tanh(Var a) {
  const int ia = a.id();
  Matrix out = a.value().array().tanh();
  const int self = static_cast<int>(a.tape()->size());
  return a.tape()->push(std::move(out), {ia}, [ia, self](Tape& t, const Matrix& g) {
    const auto& y = t.value(self).array();
    t.accumulate(ia, (g.array() * (1.0 - y.square())).matrix());
  });
}

Var leaky_relu(Var a, double alpha) {
  const int ia = a.id();
  Matrix out = a.value().unaryExpr([alpha](double x) { return x > 0.0 ? x : alpha * x; });
  return a.tape()->push(std::move(out), {ia}, [ia, alpha](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    t.accumulate(ia, g.binaryExpr(x, [alpha](double gi, double xi) {
      return xi > 0.0 ? gi : alpha * gi;
    }));
  });
}

Var exp(Var a) {
  const int ia = a.id();
  Matrix out = a.value().array().exp();
  const int self = static_cast<int>(a.tape()->size());
  return a.tape()->push(std::move(out), {ia}, [ia, self](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.cwiseProduct(t.value(self)));
  });
}

Var square(Var a) {
  const int ia = a.id();
  Matrix out = a.value().array().square();
  return a.tape()->push(std::move(out), {ia}, [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, 2.0 * g.cwiseProduct(t.value(ia)));
  });
}

Var clamp(Var a, double lo, double hi) {
  const int ia = a.id();
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape()->push(std::move(out), {ia}, [ia, lo, hi](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    t.accumulate(ia, g.binaryExpr(x, [lo, hi](double gi, double xi) {
      return (xi < lo || xi > hi) ? 0.0 : gi;
    }));
  });
}

Var softplus(Var a) {
  const int ia = a.id();
  Matrix out = a.value().unaryExpr(
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return a.tape()->push(std::move(out), {ia}, [ia](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    t.accumulate(ia, g.binaryExpr(x, [](double gi, double xi) {
      return gi / (1.0 + std::exp(-xi));
    }));
  });
}

Var sum(Var a) {
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->push(std::move(out), {ia}, [ia, r, c](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean: empty node");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  const int ia = a.id();
  Matrix out = a.value().rowwise().sum();
  const Eigen::Index c = a.cols();
  return a.tape()->push(std::move(out), {ia}, [ia, c](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.replicate(1, c));
  });
}

Var log_sum_exp_rows(Var a) {
  const int ia = a.id();
  const Matrix& x = a.value();
  const Eigen::VectorXd mx = x.rowwise().maxCoeff();
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out(r, 0) = mx(r) + std::log((x.row(r).array() - mx(r)).exp().sum());
  const int self = static_cast<int>(a.tape()->size());
  return a.tape()->push(std::move(out), {ia}, [ia, self](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    const Matrix& lse = t.value(self);
    Matrix soft = (x.colwise() - lse.col(0)).array().exp();
    t.accumulate(ia, soft.array().colwise() * g.col(0).array());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw ContractError("concat_cols: operands on different tapes");
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k)
    out.middleCols(offsets[k], parts[k].cols()) = parts[k].value();
  auto parents = ids;
  return t.push(std::move(out), std::move(parents),
                [ids, offsets](Tape& t, const Matrix& g) {
                  for (std::size_t k = 0; k < ids.size(); ++k)
                    if (t.needs_grad(ids[k]))
                      t.accumulate(ids[k], g.middleCols(offsets[k], t.value(ids[k]).cols()));
                });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw DimensionError("slice_cols: range out of bounds");
  const int ia = a.id();
  Matrix out = a.value().middleCols(start, count);
  return a.tape()->push(std::move(out), {ia}, [ia, start, count](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    Matrix full = Matrix::Zero(x.rows(), x.cols());
    full.middleCols(start, count) = g;
    t.accumulate(ia, full);
  });
}

Var bce_with_logits(Var logits, const Matrix& targets) {
  if (logits.cols() != 1 || targets.rows() != logits.rows() || targets.cols() != 1)
    throw DimensionError("bce_with_logits: expected matching r x 1 logits and targets");
  const int ia = logits.id();
  const Matrix& x = logits.value();
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double z = x(r, 0);
    out(r, 0) = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - targets(r, 0) * z;
  }
  return logits.tape()->push(std::move(out), {ia}, [ia, targets](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    Matrix d(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      d(r, 0) = g(r, 0) * (1.0 / (1.0 + std::exp(-x(r, 0))) - targets(r, 0));
    t.accumulate(ia, d);
  });
}

}  // namespace dib
