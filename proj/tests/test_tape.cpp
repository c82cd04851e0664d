#include "doctest.h"
#include "dib/rng.hpp"
#include "dib/tape.hpp"
#include "oracles.hpp"

using namespace dib;

namespace {

using Build = std::function<Var(Tape&, Var, Var)>;

/// Scalarizes op(a, b) with a fixed random projection and checks d/da, d/db.
double op_grad_error(const Build& op, Eigen::Index ar, Eigen::Index ac, Eigen::Index br,
                     Eigen::Index bc, std::uint64_t seed = 1) {
  Rng rng(seed);
  ParamStore store;
  store.add("a", sample_standard_normal(rng, {std::size_t(ar), std::size_t(ac)}));
  store.add("b", sample_standard_normal(rng, {std::size_t(br), std::size_t(bc)}));
  Matrix proj;
  auto loss = [&](Tape& t) {
    Var out = op(t, t.param(store, "a"), t.param(store, "b"));
    if (proj.size() == 0) proj = standard_normal_matrix(rng, out.rows(), out.cols());
    return sum(out * t.constant(proj));
  };
  {
    Tape t;
    store.zero_grad();
    t.backward(loss(t));
  }
  auto f = [&] {
    Tape t;
    return loss(t).scalar();
  };
  return oracle::check_gradients(store, store.grads(), f).max_rel_error;
}

}  // namespace

TEST_CASE("binary op gradients match central differences") {
  CHECK(op_grad_error([](Tape&, Var a, Var b) { return matmul(a, b); }, 3, 4, 4, 2) < 1e-6);
  CHECK(op_grad_error([](Tape&, Var a, Var b) { return add_bias(a, b); }, 3, 4, 1, 4) < 1e-6);
  CHECK(op_grad_error([](Tape&, Var a, Var b) { return a + b; }, 3, 2, 3, 2) < 1e-6);
  CHECK(op_grad_error([](Tape&, Var a, Var b) { return a - b; }, 3, 2, 3, 2) < 1e-6);
  CHECK(op_grad_error([](Tape&, Var a, Var b) { return a * b; }, 3, 2, 3, 2) < 1e-6);
  CHECK(op_grad_error([](Tape&, Var a, Var b) { return concat_cols({a, b, a}); }, 3, 2, 3, 1) <
        1e-6);
}

TEST_CASE("unary op gradients match central differences") {
  auto check = [](std::function<Var(Var)> g) {
    return op_grad_error([g](Tape&, Var a, Var) { return g(a); }, 4, 3, 1, 1);
  };
  CHECK(check([](Var a) { return scale(a, -2.5); }) < 1e-6);
  CHECK(check([](Var a) { return add_scalar(a, 3.0); }) < 1e-6);
  CHECK(check([](Var a) { return tanh(a); }) < 1e-6);
  CHECK(check([](Var a) { return leaky_relu(a, 0.3); }) < 1e-6);
  CHECK(check([](Var a) { return exp(a); }) < 1e-6);
  CHECK(check([](Var a) { return square(a); }) < 1e-6);
  CHECK(check([](Var a) { return softplus(a); }) < 1e-6);
  CHECK(check([](Var a) { return clamp(a, -0.5, 0.5); }) < 1e-6);
  CHECK(check([](Var a) { return sum(a); }) < 1e-6);
  CHECK(check([](Var a) { return mean(a); }) < 1e-6);
  CHECK(check([](Var a) { return row_sum(a); }) < 1e-6);
  CHECK(check([](Var a) { return log_sum_exp_rows(scale(a, 3.0)); }) < 1e-6);
  CHECK(check([](Var a) { return slice_cols(a, 1, 2); }) < 1e-6);
}

TEST_CASE("bce_with_logits matches the textbook formula and its gradient") {
  Tape t;
  Matrix z(4, 1);
  z << -30.0, -1.0, 0.5, 40.0;
  Matrix y(4, 1);
  y << 0, 1, 0, 1;
  Var logits = t.leaf(z);
  Var l = bce_with_logits(logits, y);
  for (int i = 0; i < 4; ++i) {
    double p = 1.0 / (1.0 + std::exp(-z(i)));
    double ref = -(y(i) * std::log(p) + (1 - y(i)) * std::log1p(-p));
    if (std::isfinite(ref)) CHECK(l.value()(i, 0) == doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK(l.value()(0, 0) == doctest::Approx(std::log1p(std::exp(-30.0))).epsilon(1e-12));
  t.backward(sum(l));
  Matrix g = t.grad(logits);
  for (int i = 0; i < 4; ++i) CHECK(g(i, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-z(i))) - y(i)));
  Rng rng(2);
  CHECK(op_grad_error(
            [&](Tape&, Var a, Var) {
              Matrix yy(a.rows(), 1);
              for (Eigen::Index i = 0; i < yy.rows(); ++i) yy(i, 0) = i % 2;
              return bce_with_logits(a, yy);
            },
            5, 1, 1, 1) < 1e-6);
}

TEST_CASE("log_sum_exp_rows is stable for large inputs") {
  Tape t;
  Matrix a(1, 3);
  a << 1000.0, 1000.0, -1000.0;
  Var r = log_sum_exp_rows(t.constant(a));
  CHECK(r.value()(0, 0) == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  Tape t;
  Matrix x(1, 1);
  x << 3.0;
  Var a = t.leaf(x);
  Var y = a * a + a;  // dy/da = 2a + 1
  t.backward(sum(y));
  CHECK(t.grad(a)(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("param leaves accumulate into the store across backward calls") {
  ParamStore s;
  s.add("w", Tensor({1, 1}, {2.0}));
  for (int rep = 0; rep < 2; ++rep) {
    Tape t;
    t.backward(sum(square(t.param(s, "w"))));
  }
  CHECK(s.grad("w")[0] == doctest::Approx(8.0));
}

TEST_CASE("tape contract errors") {
  Tape t, other;
  Var a = t.leaf(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(t.backward(a), ContractError);
  Var b = other.leaf(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(a + b, ContractError);
  CHECK_THROWS_AS(matmul(a, t.leaf(Matrix::Ones(3, 1))), DimensionError);
  CHECK_THROWS_AS(a + t.leaf(Matrix::Ones(2, 3)), DimensionError);
  CHECK_THROWS_AS(add_bias(a, t.leaf(Matrix::Ones(2, 2))), DimensionError);
  CHECK_THROWS_AS(slice_cols(a, 1, 5), DimensionError);
  CHECK_THROWS_AS(Var().value(), ContractError);
  CHECK_THROWS_AS(a.scalar(), ContractError);
}

TEST_CASE("constants receive no gradient") {
  Tape t;
  Var c = t.constant(Matrix::Ones(2, 1));
  Var a = t.leaf(Matrix::Ones(2, 1));
  t.backward(sum(c * a));
  CHECK(t.grad(c).isZero());
  CHECK(t.grad(a).isApproxToConstant(1.0));
}
