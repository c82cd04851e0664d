#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dib/miest.hpp"
#include "dib/objective.hpp"

namespace dib {

struct InfoPlanePoint {
  std::size_t step = 0;
  double beta = 0.0;
  double total_bits = 0.0;  ///< sum of per-channel bound midpoints
  double gap_bits = 0.0;    ///< sum of per-channel bound gaps
  double predictive_bits = 0.0;
  double accuracy = 0.0;       ///< sampled latents
  double accuracy_mean = 0.0;  ///< mean latents
  std::vector<double> per_channel_bits;
  std::vector<double> per_channel_kl_bits;
};

struct MeasureConfig {
  std::size_t K = 1024;  ///< clipped to the dataset size per channel
  std::size_t B = 8;
  std::size_t eval_samples = 8;
  std::uint64_t seed = 0;
};

/// Bounds every channel of `model` on the inputs of `mi_data`, and predictive
/// bits / accuracy on `eval_data`.
InfoPlanePoint measure_point(const DibModel& model, const Matrix& mi_data,
                             const LabeledData& eval_data, double h_y_bits,
                             const MeasureConfig& config, std::size_t step, double beta);

/// Sorted by total_bits (ties by step).
std::vector<InfoPlanePoint> assemble_plane(std::vector<InfoPlanePoint> points);

struct MissingCheckpoints : std::runtime_error {
  explicit MissingCheckpoints(std::vector<std::size_t> gaps);
  std::vector<std::size_t> missing;
};

/// Throws MissingCheckpoints listing expected steps absent from `present`.
void require_checkpoints(std::span<const std::size_t> expected,
                         std::span<const std::size_t> present);

/// Columns: beta,total_bits,gap_bits,predictive_bits,accuracy,ch<j>_bits...
void write_plane_csv(std::ostream& os, std::span<const InfoPlanePoint> plane);

/// Rows: checkpoints ordered by total_bits. Columns: channels.
Matrix channel_allocation(std::span<const InfoPlanePoint> plane);
/// Columns: step,beta,total_bits then one per channel named by `labels`.
void write_alloc_csv(std::ostream& os, std::span<const InfoPlanePoint> plane,
                     std::span<const std::string> labels);

/// Predictive bits linearly interpolated at `total_bits` along the sorted plane.
double predictive_at(std::span<const InfoPlanePoint> plane, double total_bits);

/// Point whose total_bits is closest to `target`.
const InfoPlanePoint& nearest_point(std::span<const InfoPlanePoint> plane, double target);

enum class Similarity { Bhattacharyya, Wasserstein };

std::string to_string(Similarity s);
Similarity parse_similarity(const std::string& text);

struct DistinguishabilityMatrix {
  std::vector<double> probes;
  Matrix m;
};

/// Closed-form similarity of two codes in [0, 1]; exp(-W2) for Wasserstein.
double similarity(const GaussianCode& a, const GaussianCode& b, Similarity s);

DistinguishabilityMatrix distinguishability(const ParamStore& store, const EncoderSpec& spec,
                                            std::size_t channel, std::span<const double> probes,
                                            Similarity s = Similarity::Bhattacharyya);

/// Empirical quantiles at (k + 0.5) / n, k = 0..n-1, linear interpolation.
std::vector<double> quantile_probes(std::span<const double> values, std::size_t n = 64);

/// First row and column hold the probe values.
void write_disting_csv(std::ostream& os, const DistinguishabilityMatrix& d);

inline constexpr double kTopChannelThresholdBits = 0.1;

/// Channels with bits >= threshold, ordered by bits descending, at most k.
std::vector<std::size_t> top_k_channels(const InfoPlanePoint& point, std::size_t k,
                                        double threshold_bits = kTopChannelThresholdBits);

}  // namespace dib
