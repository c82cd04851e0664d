#include <sstream>
#include <set>

#include "doctest.h"
#include "dib/checkpoint.hpp"
#include "dib/rng.hpp"
#include "dib/tensor.hpp"

using namespace dib;

TEST_CASE("tensor stores row-major and maps rank-2 views") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.matrix()(1, 0) == 4);
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  CHECK(Tensor::from_matrix(m) == t);
  CHECK(Tensor({4}).rows() == 1);
  CHECK(Tensor({4}).cols() == 4);
}

TEST_CASE("tensor rejects mismatched data and rank-3 matrix views") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  Tensor t({2, 2, 2});
  CHECK_THROWS_AS(t.matrix(), DimensionError);
}

TEST_CASE("tensor finiteness and zeroing") {
  Tensor t({3}, {1, 2, 3});
  CHECK(t.all_finite());
  t[1] = std::nan("");
  CHECK_FALSE(t.all_finite());
  t.set_zero();
  CHECK(t == Tensor({3}));
}

TEST_CASE("param store keeps gradient buffers shaped like params") {
  ParamStore s;
  s.add("a/w", Tensor({2, 2}, {1, 2, 3, 4}));
  s.add("b", Tensor({3}));
  CHECK(s.size() == 2);
  CHECK(s.scalar_count() == 7);
  CHECK(s.grad("a/w").shape() == s.param("a/w").shape());
  s.grad("a/w")[0] = 5;
  s.zero_grad();
  CHECK(s.grad("a/w")[0] == 0);
  CHECK(s.paths() == std::vector<std::string>{"a/w", "b"});
  CHECK_THROWS_AS(s.param("missing"), ContractError);
}

TEST_CASE("rng is a pure function of seed and call sequence") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  Rng s1 = Rng(7).split(3), s2 = Rng(7).split(3), s3 = Rng(7).split(4);
  CHECK(s1.next_u64() == s2.next_u64());
  CHECK(Rng(7).split(3).next_u64() != s3.next_u64());
}

TEST_CASE("rng uniform and normal moments") {
  Rng r(1);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    su += u;
    double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_int covers its range without bias") {
  Rng r(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[r.uniform_int(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("shuffle is a permutation") {
  Rng r(9);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  r.shuffle(v);
  std::set<int> seen(v.begin(), v.end());
  CHECK(seen.size() == 50);
}

TEST_CASE("checkpoint round trip is bitwise") {
  ParamStore s;
  Rng r(3);
  s.add("enc/ch000/mu", sample_standard_normal(r, {1, 8}));
  s.add("dec/layer0/weight", sample_standard_normal(r, {80, 4}));
  s.add("scalar", Tensor({}, {3.25}));
  std::stringstream ss;
  write_checkpoint(ss, s);
  ParamStore back = read_checkpoint(ss);
  CHECK(back.params() == s.params());
}

TEST_CASE("checkpoint header layout") {
  ParamStore s;
  s.add("ab", Tensor({1}, {1.0}));
  std::stringstream ss;
  write_checkpoint(ss, s);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 8) == "DIBCKPT1");
  // magic, count, path_len, "ab", rank, shape[0], payload
  CHECK(bytes.size() == 8 + 8 + 8 + 2 + 8 + 8 + 8);
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);
  CHECK(static_cast<unsigned char>(bytes[16]) == 2);
}

TEST_CASE("checkpoint rejects bad magic and truncation") {
  std::stringstream bad("NOTACKPT........");
  CHECK_THROWS_AS(read_checkpoint(bad), CheckpointError);
  ParamStore s;
  s.add("w", Tensor({4}, {1, 2, 3, 4}));
  std::stringstream ss;
  write_checkpoint(ss, s);
  std::string cut = ss.str().substr(0, ss.str().size() - 5);
  std::stringstream truncated(cut);
  CHECK_THROWS_AS(read_checkpoint(truncated), CheckpointError);
}
