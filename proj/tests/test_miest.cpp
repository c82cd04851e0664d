#include <algorithm>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "dib/miest.hpp"
#include "oracles.hpp"

using namespace dib;

namespace {

/// Per-item codes, no deduplication, straight from the bound formulas (nats).
std::pair<double, double> naive_bounds(const EvalBatch& b) {
  const std::size_t K = b.size();
  std::vector<std::vector<double>> L(K, std::vector<double>(K));
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      const auto c = b.codes.row(b.outcome[j]);
      L[i][j] = log_density(b.u.row(i).transpose(), c.mu, c.log_var);
    }
  double lo = 0, up = 0;
  for (std::size_t i = 0; i < K; ++i) {
    double mx = *std::max_element(L[i].begin(), L[i].end());
    double all = 0, rest = 0;
    for (std::size_t j = 0; j < K; ++j) {
      all += std::exp(L[i][j] - mx);
      if (j != i) rest += std::exp(L[i][j] - mx);
    }
    lo += L[i][i] - (mx + std::log(all / K));
    up += L[i][i] - (mx + std::log(rest / (K - 1)));
  }
  return {lo / K, up / K};
}

EvalBatch random_batch(Rng& rng, std::size_t K, std::size_t M, std::size_t D) {
  EvalBatch b;
  b.codes.mu = standard_normal_matrix(rng, M, D);
  b.codes.log_var = 0.3 * standard_normal_matrix(rng, M, D);
  b.u.resize(K, D);
  for (std::size_t i = 0; i < K; ++i) {
    int o = static_cast<int>(rng.uniform_int(M));
    b.outcome.push_back(o);
    b.u.row(i) = sample(b.codes.row(o), rng).transpose();
  }
  return b;
}

}  // namespace

TEST_CASE("bounds agree with the naive per-item formulas") {
  Rng rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    EvalBatch b = random_batch(rng, 40, 5, 3);
    auto [lo, up] = naive_bounds(b);
    auto ls = infonce_summands(b), us = loo_summands(b);
    CHECK(std::accumulate(ls.begin(), ls.end(), 0.0) / 40 == doctest::Approx(lo).epsilon(1e-10));
    CHECK(std::accumulate(us.begin(), us.end(), 0.0) / 40 == doctest::Approx(up).epsilon(1e-10));
  }
}

TEST_CASE("identical inputs give zero information") {
  Rng rng(2);
  EvalBatch b = random_batch(rng, 30, 1, 4);
  std::vector<EvalBatch> bs{b};
  auto r = infonce_loo_bounds(bs);
  CHECK(std::abs(r.lower_bits) < 1e-12);
  CHECK(std::abs(r.upper_bits) < 1e-12);
}

TEST_CASE("lower bound never exceeds log2 K") {
  OrthogonalScheme s{4, 50.0, 32};
  Rng rng(3);
  ChannelData cd = s.dataset(1024, rng);
  for (std::size_t K : {2u, 8u, 64u}) {
    auto bs = draw_batches(cd, K, 16, rng);
    for (const auto& b : bs) {
      auto r = infonce_lower(std::span(&b, 1));
      CHECK(r.lower_bits <= std::log2(static_cast<double>(K)) + 1e-12);
    }
  }
}

TEST_CASE("upper bound needs K >= 2") {
  Rng rng(4);
  EvalBatch b = random_batch(rng, 1, 2, 2);
  CHECK_THROWS_AS(loo_summands(b), ContractError);
  CHECK_NOTHROW(infonce_summands(b));
}

TEST_CASE("bounds are invariant to item order") {
  Rng rng(5);
  EvalBatch b = random_batch(rng, 50, 6, 3);
  EvalBatch p = b;
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  for (std::size_t i = 0; i < 50; ++i) {
    p.outcome[i] = b.outcome[perm[i]];
    p.u.row(i) = b.u.row(perm[i]);
  }
  auto r1 = infonce_loo_bounds(std::span(&b, 1)), r2 = infonce_loo_bounds(std::span(&p, 1));
  CHECK(std::abs(r1.lower_bits - r2.lower_bits) < 1e-12);
  CHECK(std::abs(r1.upper_bits - r2.upper_bits) < 1e-12);
}

TEST_CASE("two-outcome scheme limits") {
  Rng rng(6);
  ChannelData far = OrthogonalScheme{1, 20.0, 32}.dataset(1024, rng);
  auto r = measure_bounds(far, 1024, 8, rng);
  CHECK(std::abs(r.lower_bits - 1.0) < 0.02);
  ChannelData zero = OrthogonalScheme{1, 0.0, 32}.dataset(1024, rng);
  auto z = measure_bounds(zero, 1024, 8, rng);
  CHECK(std::abs(z.upper_bits) < 0.02);
}

TEST_CASE("four-bit scheme at d=8 is tightly bracketed") {
  Rng rng(7);
  ChannelData cd = OrthogonalScheme{4, 8.0, 32}.dataset(1024, rng);
  auto r = measure_bounds(cd, 1024, 8, rng);
  CHECK(r.gap_bits() < 0.1);
  CHECK(r.lower_bits >= 3.9);
  CHECK(r.upper_bits <= 4.1);
  CHECK(r.upper_bits >= r.lower_bits - r.tolerance());
}

TEST_CASE("monte carlo oracle limits and sandwich") {
  Rng rng(8);
  ChannelData z = OrthogonalScheme{2, 0.0, 32}.dataset(1024, rng);
  auto mz = mc_oracle(z, rng);
  CHECK(std::abs(mz.bits) < 0.005);
  ChannelData one = OrthogonalScheme{1, 10.0, 32}.dataset(1024, rng);
  CHECK(std::abs(mc_oracle(one, rng).bits - 1.0) < 0.01);
  ChannelData mid = OrthogonalScheme{2, 2.0, 32}.dataset(1024, rng);
  auto mm = mc_oracle(mid, rng);
  CHECK(mm.bits > 0.0);
  CHECK(mm.bits < 2.0);
  CHECK(mm.stderr_bits > 0.0);
  auto r = measure_bounds(mid, 1024, 16, rng);
  double tol = 3 * (r.lower_stderr() + mm.stderr_bits);
  CHECK(r.lower_bits <= mm.bits + tol);
  CHECK(mm.bits <= r.upper_bits + 3 * (r.upper_stderr() + mm.stderr_bits));
}

TEST_CASE("oracle refuses supports it cannot enumerate") {
  ChannelData cd;
  const auto n = static_cast<Eigen::Index>(kMcMaxSupport + 1);
  cd.codes.mu = Matrix::Zero(n, 1);
  cd.codes.log_var = Matrix::Zero(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) cd.item_outcome.push_back(static_cast<int>(i));
  Rng rng(0);
  CHECK_THROWS_AS(mc_oracle(cd, rng, 10), ContractError);
}

TEST_CASE("per-outcome contributions") {
  Rng rng(9);
  ChannelData prior = OrthogonalScheme{2, 0.0, 8}.dataset(256, rng);
  for (Eigen::Index m = 0; m < 4; ++m) {
    auto c = per_outcome_contribution(prior.codes.row(m), prior, 256, 8, rng);
    CHECK(std::abs(c.lower_bits) < 0.02);
    CHECK(std::abs(c.upper_bits) < 0.02);
  }
  ChannelData far = OrthogonalScheme{1, 20.0, 32}.dataset(1024, rng);
  for (Eigen::Index m = 0; m < 2; ++m) {
    double freq = 0.0;
    for (int o : far.item_outcome) freq += (o == m);
    freq /= static_cast<double>(far.items());
    auto c = per_outcome_contribution(far.codes.row(m), far, 1024, 8, rng);
    CHECK(c.lower_bits == doctest::Approx(-std::log2(freq)).epsilon(0.01));
    CHECK(c.upper_bits == doctest::Approx(-std::log2(freq)).epsilon(0.01));
  }
}

TEST_CASE("per-item contributions recompose the batch bounds") {
  Rng rng(10);
  ChannelData cd = OrthogonalScheme{2, 2.0, 32}.dataset(512, rng);
  auto bs = draw_batches(cd, 128, 1, rng);
  double lo = 0, up = 0;
  for (std::size_t i = 0; i < bs[0].size(); ++i) {
    auto c = contribution_in_batch(bs[0], i);
    lo += c.lower_bits;
    up += c.upper_bits;
  }
  auto r = infonce_loo_bounds(bs);
  CHECK(std::abs(lo / 128 - r.lower_bits) < 1e-9);
  CHECK(std::abs(up / 128 - r.upper_bits) < 1e-9);
}

TEST_CASE("batch drawing conventions") {
  Rng rng(11);
  ChannelData cd = OrthogonalScheme{2, 1.0, 8}.dataset(100, rng);
  auto whole = draw_batches(cd, 100, 2, rng);
  for (const auto& b : whole) {
    std::vector<int> o = b.outcome, ref = cd.item_outcome;
    std::sort(o.begin(), o.end());
    std::sort(ref.begin(), ref.end());
    CHECK(o == ref);
  }
  auto part = draw_batches(cd, 30, 3, rng);
  CHECK(part.size() == 3);
  CHECK(part[0].size() == 30);
}

TEST_CASE("make_channel_data deduplicates inputs") {
  ParamStore s;
  Rng rng(0);
  auto spec = EncoderSpec::binary_table(4);
  init_encoder(s, spec, 0, rng);
  Vector x(6);
  x << 1, 0, 1, 1, 0, 1;
  ChannelData cd = make_channel_data(s, spec, 0, x);
  CHECK(cd.support() == 2);
  CHECK(cd.items() == 6);
  auto p = cd.outcome_probabilities();
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
  CHECK(std::max(p[0], p[1]) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("orthogonal scheme geometry and limits") {
  OrthogonalScheme s{3, 2.5, 16};
  CodeMatrix c = s.codes();
  CHECK(c.mu.rows() == 8);
  CHECK(c.mu.row(3).norm() == doctest::Approx(2.5));
  CHECK(c.mu.row(3).dot(c.mu.row(5)) == 0.0);
  CHECK(c.log_var.isZero());
  CHECK_THROWS_AS((OrthogonalScheme{6, 1.0, 32}.codes()), ContractError);
}

TEST_CASE("more batches shrink the standard error by about sqrt 2") {
  Rng rng(12);
  ChannelData cd = OrthogonalScheme{2, 2.0, 32}.dataset(1024, rng);
  Rng r1(1), r2(2);
  auto a = measure_bounds(cd, 64, 256, r1);
  auto b = measure_bounds(cd, 64, 512, r2);
  CHECK(a.lower_stderr() / b.lower_stderr() == doctest::Approx(std::sqrt(2.0)).epsilon(0.2));
  CHECK(a.upper_stderr() / b.upper_stderr() == doctest::Approx(std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("larger evaluation batches tighten the bounds") {
  Rng rng(13);
  ChannelData cd = OrthogonalScheme{1, 8.0, 32}.dataset(1024, rng);
  auto small = measure_bounds(cd, 64, 32, rng);
  auto large = measure_bounds(cd, 1024, 32, rng);
  CHECK(large.gap_bits() <= small.gap_bits() + small.tolerance() + large.tolerance());
}

TEST_CASE("benchmark CSV schema") {
  BenchConfig bc;
  bc.entropy_bits = {1};
  bc.separations = {0.0, 4.0};
  bc.batch_sizes = {64};
  bc.batches = 8;
  bc.mc_samples = 2000;
  auto rows = bench_orthogonal(bc);
  CHECK(rows.size() == 2);
  std::stringstream ss;
  write_bench_csv(ss, rows);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "H_bits,d,K,B,lower_bits,lower_std,upper_bits,upper_std,mc_bits,mc_stderr");
  int lines = 0;
  for (std::string l; std::getline(ss, l);) ++lines;
  CHECK(lines == 2);
}

TEST_CASE("benchmark widens the latent space for large supports") {
  BenchConfig bc;
  bc.entropy_bits = {6};
  bc.separations = {0.0};
  bc.batch_sizes = {64};
  bc.batches = 4;
  bc.mc_samples = 500;
  auto rows = bench_orthogonal(bc);
  REQUIRE(rows.size() == 1);
  CHECK(std::abs(rows[0].bounds.lower_bits) < 0.05);
}

TEST_CASE("benchmark rows without separation are sandwiched") {
  BenchConfig bc;
  bc.entropy_bits = {1, 2, 4};
  bc.separations = {0.0};
  bc.batch_sizes = {64, 256};
  bc.batches = 16;
  bc.mc_samples = 500;
  for (const auto& r : bench_orthogonal(bc)) {
    CHECK(r.sandwiched());
    CHECK(std::abs(r.bounds.lower_bits) < 1e-12);
    CHECK(std::abs(r.bounds.upper_bits) < 1e-12);
  }
}

TEST_CASE("benchmark rejects an explicit latent space too small for the support") {
  BenchConfig bc;
  bc.entropy_bits = {1, 6};
  bc.latent_dim = 32;
  CHECK_THROWS_AS(bench_orthogonal(bc), ContractError);
}
