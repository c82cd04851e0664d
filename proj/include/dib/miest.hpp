#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dib/encoder.hpp"
#include "dib/rng.hpp"

namespace dib {

/// K samples from p(x) p(u|x). Codes are stored once per distinct outcome;
/// `outcome[i]` indexes the code of item i and `u.row(i)` is its latent draw.
struct EvalBatch {
  CodeMatrix codes;
  std::vector<int> outcome;
  Matrix u;

  std::size_t size() const { return outcome.size(); }
};

struct BoundsResult {
  double lower_bits = 0.0;
  double upper_bits = 0.0;
  double lower_std = 0.0;
  double upper_std = 0.0;
  std::size_t batches = 0;
  std::size_t batch_size = 0;

  double midpoint_bits() const { return 0.5 * (lower_bits + upper_bits); }
  double gap_bits() const { return upper_bits - lower_bits; }
  double lower_stderr() const;
  double upper_stderr() const;
  /// 3 (lower_std + upper_std) / sqrt(B).
  double tolerance() const;
};

/// Per-item InfoNCE summands, in nats:
///   log p(u_i|x_i) - log( (1/K) sum_j p(u_i|x_j) ).
std::vector<double> infonce_summands(const EvalBatch& batch);
/// Per-item leave-one-out summands, in nats (requires K >= 2).
std::vector<double> loo_summands(const EvalBatch& batch);

/// Means over batches, in bits. Bounds are computed entirely in log space.
BoundsResult infonce_lower(std::span<const EvalBatch> batches);
BoundsResult loo_upper(std::span<const EvalBatch> batches);
BoundsResult infonce_loo_bounds(std::span<const EvalBatch> batches);

/// A frozen channel over an enumerable evaluation dataset: one code per
/// distinct input value and the outcome index of every dataset item.
struct ChannelData {
  CodeMatrix codes;
  std::vector<int> item_outcome;
  std::vector<double> outcome_value;

  std::size_t support() const { return static_cast<std::size_t>(codes.mu.rows()); }
  std::size_t items() const { return item_outcome.size(); }
  std::vector<double> outcome_probabilities() const;
};

ChannelData make_channel_data(const ParamStore& store, const EncoderSpec& spec,
                              std::size_t channel, const Vector& x);

/// Draws B batches of K items. K equal to the dataset size takes every item
/// once; smaller K samples without replacement; larger K with replacement.
std::vector<EvalBatch> draw_batches(const ChannelData& data, std::size_t K, std::size_t B,
                                    Rng& rng);

BoundsResult measure_bounds(const ChannelData& data, std::size_t K, std::size_t B, Rng& rng);

struct McEstimate {
  double bits = 0.0;
  double stderr_bits = 0.0;
  std::size_t samples = 0;
};

inline constexpr std::size_t kMcDefaultSamples = 200000;
inline constexpr std::size_t kMcMaxSupport = 1u << 14;

/// Monte Carlo E[log p(u|x) / p(u)] under the dataset's empirical p(x).
/// Throws ContractError when the support exceeds kMcMaxSupport (the marginal
/// mixture would no longer be enumerable at useful cost).
McEstimate mc_oracle(const ChannelData& data, Rng& rng,
                     std::size_t n_samples = kMcDefaultSamples);

struct OutcomeContribution {
  double lower_bits = 0.0;
  double upper_bits = 0.0;
};

/// Contribution of item i inside a batch: its InfoNCE summand (lower) and its
/// leave-one-out summand (upper).
OutcomeContribution contribution_in_batch(const EvalBatch& batch, std::size_t i);

/// Information contributed by the specific outcome `probe`: per batch, the probe
/// joins K-1 background items drawn from the dataset and u ~ p(u|probe). The
/// lower estimate keeps the probe's own density in the denominator mixture,
/// the upper one drops it. Averaged over B batches.
OutcomeContribution per_outcome_contribution(const GaussianCode& probe, const ChannelData& data,
                                             std::size_t K, std::size_t B, Rng& rng);

/// Discrete X uniform over 2^H outcomes, encoded to unit-variance Gaussians at
/// d * e_m on orthogonal axes of R^latent_dim.
struct OrthogonalScheme {
  int entropy_bits = 1;
  double separation = 0.0;
  std::size_t latent_dim = 32;

  std::size_t support() const { return std::size_t{1} << entropy_bits; }
  CodeMatrix codes() const;
  /// Fixed evaluation dataset of i.i.d. uniform draws.
  ChannelData dataset(std::size_t n, Rng& rng) const;
};

struct BenchConfig {
  std::vector<int> entropy_bits{1, 2, 4, 6};
  std::vector<double> separations{0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0};
  std::vector<std::size_t> batch_sizes{64, 256, 1024};
  std::size_t batches = 256;
  std::size_t dataset_size = 1024;
  std::size_t mc_samples = kMcDefaultSamples;
  std::size_t latent_dim = 0;  ///< 0 selects max(32, 2^H) per entropy level
  std::uint64_t seed = 0;
};

struct BenchRow {
  int entropy_bits = 0;
  double separation = 0.0;
  BoundsResult bounds;
  McEstimate mc;

  /// lower <= mc <= upper, each side within 3 standard errors plus 1e-12 bits.
  bool sandwiched() const;
};

std::vector<BenchRow> bench_orthogonal(const BenchConfig& config);

/// Columns: H_bits,d,K,B,lower_bits,lower_std,upper_bits,upper_std,mc_bits,mc_stderr
void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows);

}  // namespace dib
