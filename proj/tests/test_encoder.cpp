#include "doctest.h"
#include "dib/encoder.hpp"
#include "dib/gaussian.hpp"
#include "oracles.hpp"

using namespace dib;

TEST_CASE("kl closed form examples") {
  Vector mu = Vector::Zero(4), lv = Vector::Zero(4);
  CHECK(kl_to_prior(mu, lv) == 0.0);
  mu(0) = 1.0;
  CHECK(kl_to_prior(mu, lv) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("kl is nonnegative, permutation invariant and matches Monte Carlo") {
  Rng rng(11);
  for (int k = 0; k < 5; ++k) {
    Vector mu = standard_normal_matrix(rng, 6, 1);
    Vector lv = 0.5 * standard_normal_matrix(rng, 6, 1);
    double kl = kl_to_prior(mu, lv);
    CHECK(kl >= 0.0);
    Vector pm = mu.reverse(), pl = lv.reverse();
    CHECK(kl_to_prior(pm, pl) == doctest::Approx(kl).epsilon(1e-14));
    CHECK(std::abs(oracle::mc_kl(mu, lv, 200000, 100 + k) - kl) < 0.03);
  }
}

TEST_CASE("make_code clamps log variance") {
  Vector mu = Vector::Zero(3), lv(3);
  lv << -50, 0, 50;
  auto c = make_code(mu, lv);
  CHECK(c.log_var(0) == kLogVarMin);
  CHECK(c.log_var(2) == kLogVarMax);
}

TEST_CASE("log density matches the scalar normal formula") {
  Vector u(2), mu(2), lv(2);
  u << 0.3, -1.0;
  mu << 0.0, 1.0;
  lv << 0.0, std::log(4.0);
  double ref = 0;
  for (int d = 0; d < 2; ++d) {
    double var = std::exp(lv(d));
    ref += -0.5 * std::log(2 * M_PI * var) - 0.5 * (u(d) - mu(d)) * (u(d) - mu(d)) / var;
  }
  CHECK(log_density(u, mu, lv) == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("bhattacharyya coefficient properties") {
  auto code = [](double m, double lv) {
    GaussianCode c;
    c.mu = Vector::Constant(2, m);
    c.log_var = Vector::Constant(2, lv);
    return c;
  };
  CHECK(bhattacharyya_coefficient(code(0.3, 0.1), code(0.3, 0.1)) == doctest::Approx(1.0));
  double prev = 1.0;
  for (double d = 0.5; d < 20; d += 0.5) {
    double bc = bhattacharyya_coefficient(code(0, 0), code(d, 0));
    CHECK(bc < prev);
    prev = bc;
  }
  CHECK(prev < 1e-10);
  // Equal unit variances: BC = exp(-|dmu|^2 / 8).
  CHECK(bhattacharyya_coefficient(code(0, 0), code(1, 0)) == doctest::Approx(std::exp(-2.0 / 8.0)));
  CHECK(wasserstein2(code(0, 0), code(3, 0)) == doctest::Approx(std::sqrt(18.0)));
}

TEST_CASE("binary table encoder encodes (2x-1) mu") {
  ParamStore s;
  Rng rng(0);
  auto spec = EncoderSpec::binary_table(8);
  init_encoder(s, spec, 3, rng);
  const std::string p = encoder_prefix(spec, 3);
  CHECK(p == "enc/ch003");
  CHECK(s.param(p + "/mu").shape() == std::vector<std::size_t>{1, 8});
  for (double v : s.param(p + "/log_var").values()) CHECK(v == 0.0);
  for (double v : s.param(p + "/mu").values()) CHECK(std::abs(v) < 0.06);
  auto c1 = encode_binary(1, s, spec, 3), c0 = encode_binary(0, s, spec, 3);
  CHECK((c1.mu + c0.mu).isZero());
  CHECK(kl_to_prior(c1) == doctest::Approx(kl_to_prior(c0)));
  CHECK(kl_to_prior(c1) < 0.02);
  Vector bad(1);
  bad << 0.5;
  CHECK_THROWS_AS(encode_batch(s, spec, 3, bad), DomainError);
}

TEST_CASE("scalar MLP encoder starts near the prior and rejects non-finite input") {
  ParamStore s;
  Rng rng(1);
  auto spec = EncoderSpec::scalar_mlp();
  init_encoder(s, spec, 0, rng);
  CHECK(spec.latent_dim == 32);
  auto c = encode_scalar(0.7, s, spec, 0);
  CHECK(c.dim() == 32);
  CHECK(kl_to_prior(c) < 0.05);
  CHECK_THROWS_AS(encode_scalar(std::nan(""), s, spec, 0), DomainError);
  CHECK_THROWS_AS(encode_scalar(1.0, s, EncoderSpec::binary_table(), 0), ContractError);
}

TEST_CASE("shared encoders initialize once") {
  ParamStore s;
  Rng rng(1);
  auto spec = EncoderSpec::shared_mlp(4, 8, 1);
  init_encoder(s, spec, 0, rng);
  auto before = s.params();
  init_encoder(s, spec, 5, rng);
  CHECK(s.params() == before);
  CHECK(encoder_prefix(spec, 5) == "enc/shared");
}

TEST_CASE("tape encoding agrees with the graph-free path") {
  Rng rng(2);
  for (auto spec : {EncoderSpec::binary_table(4), EncoderSpec::scalar_mlp(3, 5, 2)}) {
    ParamStore s;
    init_encoder(s, spec, 0, rng);
    Vector x(4);
    x << 0, 1, 1, 0;
    CodeMatrix cm = encode_batch(s, spec, 0, x);
    Tape t;
    CodeVars cv = encode_on_tape(s, t, spec, 0, x);
    CHECK((cv.mu.value() - cm.mu).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((cv.log_var.value() - cm.log_var).cwiseAbs().maxCoeff() < 1e-14);
    Var kl = kl_on_tape(cv);
    for (Eigen::Index i = 0; i < 4; ++i)
      CHECK(kl.value()(i, 0) == doctest::Approx(kl_to_prior(cm.row(i))).epsilon(1e-12));
    Matrix eps = standard_normal_matrix(rng, 4, static_cast<Eigen::Index>(spec.latent_dim));
    Var u = sample_on_tape(cv, eps);
    Matrix ref = cm.mu.array() + (0.5 * cm.log_var.array()).exp() * eps.array();
    CHECK((u.value() - ref).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("sampled codes have the encoded moments") {
  GaussianCode c;
  c.mu = Vector::Constant(1, 2.0);
  c.log_var = Vector::Constant(1, std::log(0.25));
  Rng rng(8);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = sample(c, rng)(0);
    s += u;
    s2 += u * u;
  }
  CHECK(s / n == doctest::Approx(2.0).epsilon(0.005));
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(0.25).epsilon(0.02));
}
