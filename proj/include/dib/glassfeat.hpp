#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dib/rng.hpp"
#include "dib/tensor.hpp"

namespace dib::glass {

enum class ParticleType : std::uint8_t { A = 0, B = 1 };

char to_char(ParticleType t);

struct Particle {
  double x = 0.0;
  double y = 0.0;
  ParticleType type = ParticleType::A;

  friend bool operator==(const Particle&, const Particle&) = default;
};

/// Particles around a center particle, positions relative to the center.
struct Neighborhood {
  ParticleType center_type = ParticleType::A;
  std::vector<Particle> particles;
  int label = 0;  ///< 1 = locus of an imminent rearrangement

  friend bool operator==(const Neighborhood&, const Neighborhood&) = default;
};

inline constexpr double kRadiusMin = 0.5;
inline constexpr double kRadiusMax = 4.0;
inline constexpr std::size_t kRadiiPerType = 50;
inline constexpr std::size_t kFeatureCount = 2 * kRadiiPerType;
/// Particles farther than this from the center are ignored.
inline constexpr double kTruncationRadius = 4.5;
inline constexpr double kRdfBinWidth = 0.02;

/// Evenly spaced radii on [kRadiusMin, kRadiusMax].
const std::vector<double>& feature_radii();
double radius_spacing();
/// Gaussian window width: half the radius spacing.
double window_width();
/// Radius of feature column `f` (columns [0, 50) are type A, [50, 100) type B).
double feature_radius(std::size_t f);
ParticleType feature_type(std::size_t f);
std::string feature_name(std::size_t f);

/// G_t(r, delta) = sum over type-t neighbors j of exp(-(R_j - r)^2 / (2 delta^2)).
double structure_function(const Neighborhood& nb, double r, double delta, ParticleType t);

/// G_A at 50 radii, then G_B at 50 radii.
Vector featurize(const Neighborhood& nb);
/// One row per neighborhood.
Matrix featurize_all(std::span<const Neighborhood> nbs);

/// Per-column standardization fitted on a training split. Zero-variance
/// columns are dropped (listed in `dropped`).
struct NormStats {
  Vector mean;
  Vector std;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped;

  Matrix apply(const Matrix& features) const;
};

NormStats fit_norm_stats(const Matrix& train);
/// JSON object with "means", "stds", "radii", "kept".
void write_norm_stats(std::ostream& os, const NormStats& stats);
NormStats read_norm_stats(std::istream& is);

struct Rdf {
  std::vector<double> r;  ///< bin centers
  std::vector<double> g;
};

/// System-averaged g(r) for neighbors of type `neighbor` around the centers,
/// normalized by annulus area and the mean number density inside kTruncationRadius.
Rdf compute_rdf(std::span<const Neighborhood> nbs, ParticleType neighbor,
                double bin_width = kRdfBinWidth, double r_max = kTruncationRadius);

struct BaselineResult {
  double accuracy = 0.0;
  double penalty = 0.0;  ///< L2 strength that gave the best validation accuracy
  Vector weights;
  double bias = 0.0;
};

/// Linear classifier, hinge loss + L2 penalty, full-batch subgradient descent
/// over a logarithmic penalty grid with iterate averaging; reports the best
/// validation accuracy.
BaselineResult linear_baseline(const Matrix& train_x, const Vector& train_y, const Matrix& val_x,
                               const Vector& val_y, std::size_t iterations = 1000);

struct Dataset {
  std::vector<Neighborhood> train;
  std::vector<Neighborhood> val;
};

struct DatasetFormatError : std::runtime_error {
  DatasetFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

/// Record format: `N <count> <center_type> <label>` followed by `count` rows of
/// `<x> <y> <type>`. Types are `A` or `B`; `#` starts a comment.
std::vector<Neighborhood> read_neighborhoods(std::istream& is);
void write_neighborhoods(std::ostream& os, std::span<const Neighborhood> nbs);

inline constexpr double kTrainFraction = 0.9;

/// 90/10 split. Consecutive (positive, negative) pairs stay together. With a
/// split file (one validation record index per line) that split is used instead
/// of the seeded shuffle.
Dataset split_dataset(std::vector<Neighborhood> all, std::uint64_t seed,
                      const std::optional<std::vector<std::size_t>>& val_indices = {});
Dataset load_dataset(const std::filesystem::path& path, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& split_file = {});

/// Feature column of G_A at the radius whose shell carries the class signal.
inline constexpr std::size_t kSynthInformativeFeature = 10;

/// Labels alternate 1, 0, 1, 0, ... Background particles are uniform in the
/// disk (hard core 0.6) away from the informative shell; positives carry
/// round(4 * difficulty) more type-A particles on that shell than negatives.
std::vector<Neighborhood> synth_dataset(std::uint64_t seed, std::size_t n, double difficulty);

/// Columns: 100 named features then label.
void write_feature_csv(std::ostream& os, const Matrix& features, const Vector& labels);

Vector labels_of(std::span<const Neighborhood> nbs);

}  // namespace dib::glass
