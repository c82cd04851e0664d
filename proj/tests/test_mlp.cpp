#include "doctest.h"
#include "dib/adam.hpp"
#include "dib/mlp.hpp"
#include "oracles.hpp"

using namespace dib;

TEST_CASE("arch strings round trip") {
  MlpArch a = make_mlp(80, 3, 256, Activation::LeakyRelu, 1, 0.3);
  CHECK(a.layers.size() == 4);
  CHECK(a.output_dim() == 1);
  CHECK(parse_arch(to_string(a)) == a);
  MlpArch t = make_mlp(1, 2, 128, Activation::Tanh, 64);
  CHECK(parse_arch(to_string(t)) == t);
  CHECK(parse_layer("16:tanh").units == 16);
  CHECK(parse_layer("8:leaky_relu:0.1").alpha == doctest::Approx(0.1));
  CHECK_THROWS_AS(parse_layer("0:tanh"), ContractError);
  CHECK_THROWS_AS(parse_layer("4:relu6"), ContractError);
  CHECK_THROWS_AS(parse_arch("4:tanh"), ContractError);
}

TEST_CASE("init shapes and head scale") {
  ParamStore s;
  Rng rng(0);
  MlpArch a = make_mlp(3, 2, 50, Activation::Tanh, 400);
  init_mlp(s, "net", a, rng, 1e-2);
  CHECK(s.param(weight_path("net", 0)).shape() == std::vector<std::size_t>{3, 50});
  CHECK(s.param(bias_path("net", 2)).shape() == std::vector<std::size_t>{1, 400});
  const auto& head = s.param(weight_path("net", 2)).values();
  double ss = 0;
  for (double v : head) ss += v * v;
  CHECK(std::sqrt(ss / head.size()) == doctest::Approx(1e-2).epsilon(0.05));
  const auto& w0 = s.param(weight_path("net", 1)).values();
  ss = 0;
  for (double v : w0) ss += v * v;
  CHECK(std::sqrt(ss / w0.size()) == doctest::Approx(std::sqrt(2.0 / 100.0)).epsilon(0.05));
}

TEST_CASE("forward pass equals a straight-line evaluation") {
  ParamStore s;
  Rng rng(4);
  MlpArch a = make_mlp(5, 2, 7, Activation::LeakyRelu, 3, 0.3);
  a.layers[1].activation = Activation::Tanh;
  init_mlp(s, "m", a, rng);
  Matrix x = standard_normal_matrix(rng, 6, 5);

  Matrix ref = x;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& L = a.layers[i];
    std::function<double(double)> act = [](double v) { return v; };
    if (L.activation == Activation::Tanh) act = [](double v) { return std::tanh(v); };
    if (L.activation == Activation::LeakyRelu)
      act = [alpha = L.alpha](double v) { return v > 0 ? v : alpha * v; };
    Matrix w = s.param(weight_path("m", i)).matrix();
    RowVector b = s.param(bias_path("m", i)).matrix().row(0);
    ref = oracle::dense_layer(ref, w, b, act);
  }
  Matrix got = mlp_apply(s, x, a, "m");
  CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-12);
  Tape t;
  Var y = mlp_forward(s, t.constant(x), a, "m");
  CHECK((y.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shape mismatch names the layer") {
  ParamStore s;
  Rng rng(0);
  MlpArch a = make_mlp(4, 1, 3, Activation::Tanh, 1);
  init_mlp(s, "dec", a, rng);
  Tape t;
  try {
    mlp_forward(s, t.constant(Matrix::Ones(2, 5)), a, "dec");
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("dec layer 0") != std::string::npos);
  }
  CHECK_THROWS_AS(mlp_apply(s, Matrix::Ones(2, 3), a, "dec"), DimensionError);
}

TEST_CASE("adam step matches the bias-corrected update") {
  ParamStore s;
  s.add("w", Tensor({2}, {1.0, -2.0}));
  AdamState st(0.1);
  s.grad("w")[0] = 0.5;
  s.grad("w")[1] = -4.0;
  adam_step(s, st);
  // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  CHECK(s.param("w")[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(s.param("w")[1] == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)));
  s.grad("w")[0] = 1.0;
  s.grad("w")[1] = 0.0;
  double w0 = s.param("w")[0];
  adam_step(s, st);
  double m = 0.9 * 0.05 + 0.1 * 1.0, v = 0.999 * 0.00025 + 0.001 * 1.0;
  double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(s.param("w")[0] == doctest::Approx(w0 - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
  CHECK(st.step == 2);
}

TEST_CASE("adam refuses non-finite gradients without modifying anything") {
  ParamStore s;
  s.add("a", Tensor({1}, {1.0}));
  s.add("b", Tensor({1}, {2.0}));
  AdamState st;
  s.grad("a")[0] = 1.0;
  s.grad("b")[0] = std::numeric_limits<double>::infinity();
  try {
    adam_step(s, st);
    FAIL("expected NonFiniteGradient");
  } catch (const NonFiniteGradient& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK(s.param("a")[0] == 1.0);
  CHECK(st.step == 0);
  CHECK(st.first_moment.empty());
}

TEST_CASE("adam minimizes a quadratic") {
  ParamStore s;
  s.add("x", Tensor({3}, {5.0, -3.0, 1.0}));
  AdamState st(0.05);
  for (int i = 0; i < 2000; ++i) {
    s.zero_grad();
    Tape t;
    t.backward(sum(square(add_scalar(t.param(s, "x"), -1.0))));
    adam_step(s, st);
  }
  for (double v : s.param("x").values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
}
