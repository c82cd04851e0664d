#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dib/tensor.hpp"

namespace dib {

/// Counter-based generator: output k is a SplitMix64 hash of (seed, k).
/// Streams depend only on the seed and call sequence, never on the platform's
/// <random> implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of mantissa.
  double uniform();
  /// Uniform on (0, 1], safe for log().
  double uniform_open0();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  /// Independent generator keyed by (this seed, stream).
  Rng split(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Tensor sample_standard_normal(Rng& rng, std::vector<std::size_t> shape);
Matrix standard_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace dib
