#include "dib/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "dib/gaussian.hpp"
#include "dib/run_io.hpp"

namespace dib {

InfoPlanePoint measure_point(const DibModel& model, const Matrix& mi_data,
                             const LabeledData& eval_data, double h_y_bits,
                             const MeasureConfig& config, std::size_t step, double beta) {
  if (static_cast<std::size_t>(mi_data.cols()) != model.encoders.size())
    throw DimensionError("measurement data has " + std::to_string(mi_data.cols()) +
                         " channels, model has " + std::to_string(model.encoders.size()));
  if (mi_data.rows() < 2) throw ContractError("measurement needs at least two items");
  InfoPlanePoint p;
  p.step = step;
  p.beta = beta;
  Rng root(config.seed);
  for (std::size_t i = 0; i < model.encoders.size(); ++i) {
    ChannelData cd = make_channel_data(model.params, model.encoders[i], i,
                                       mi_data.col(static_cast<Eigen::Index>(i)));
    Rng rng = root.split(i + 1);
    std::size_t K = std::min(config.K, cd.items());
    BoundsResult b = measure_bounds(cd, K, config.B, rng);
    p.per_channel_bits.push_back(b.midpoint_bits());
    p.gap_bits += std::max(0.0, b.gap_bits());
  }
  p.total_bits = std::accumulate(p.per_channel_bits.begin(), p.per_channel_bits.end(), 0.0);
  for (double k : channel_kl_nats(model, mi_data)) p.per_channel_kl_bits.push_back(nats_to_bits(k));
  Rng eval_rng = root.split(0);
  EvalResult e = evaluate(model, eval_data, h_y_bits, eval_rng, config.eval_samples);
  p.predictive_bits = e.predictive_bits;
  p.accuracy = e.accuracy_sampled;
  p.accuracy_mean = e.accuracy_mean;
  return p;
}

std::vector<InfoPlanePoint> assemble_plane(std::vector<InfoPlanePoint> points) {
  std::sort(points.begin(), points.end(), [](const InfoPlanePoint& a, const InfoPlanePoint& b) {
    if (a.total_bits != b.total_bits) return a.total_bits < b.total_bits;
    return a.step < b.step;
  });
  return points;
}

namespace {
std::string join_steps(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}
}  // namespace

MissingCheckpoints::MissingCheckpoints(std::vector<std::size_t> gaps)
    : std::runtime_error("missing checkpoints at steps: " + join_steps(gaps)),
      missing(std::move(gaps)) {}

void require_checkpoints(std::span<const std::size_t> expected,
                         std::span<const std::size_t> present) {
  std::vector<std::size_t> gaps;
  for (std::size_t s : expected)
    if (std::find(present.begin(), present.end(), s) == present.end()) gaps.push_back(s);
  if (!gaps.empty()) throw MissingCheckpoints(std::move(gaps));
}

void write_plane_csv(std::ostream& os, std::span<const InfoPlanePoint> plane) {
  const std::size_t n = plane.empty() ? 0 : plane.front().per_channel_bits.size();
  os << "beta,total_bits,gap_bits,predictive_bits,accuracy";
  for (std::size_t j = 0; j < n; ++j) os << ",ch" << j << "_bits";
  os << '\n';
  for (const auto& p : plane) {
    os << fmt_num(p.beta) << ',' << fmt_num(p.total_bits) << ',' << fmt_num(p.gap_bits) << ','
       << fmt_num(p.predictive_bits) << ',' << fmt_num(p.accuracy);
    for (double b : p.per_channel_bits) os << ',' << fmt_num(b);
    os << '\n';
  }
}

Matrix channel_allocation(std::span<const InfoPlanePoint> plane) {
  const std::size_t n = plane.empty() ? 0 : plane.front().per_channel_bits.size();
  Matrix m(static_cast<Eigen::Index>(plane.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < plane.size(); ++r) {
    if (plane[r].per_channel_bits.size() != n)
      throw DimensionError("plane points disagree on channel count");
    for (std::size_t c = 0; c < n; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = plane[r].per_channel_bits[c];
  }
  return m;
}

void write_alloc_csv(std::ostream& os, std::span<const InfoPlanePoint> plane,
                     std::span<const std::string> labels) {
  Matrix m = channel_allocation(plane);
  if (static_cast<Eigen::Index>(labels.size()) != m.cols() && !plane.empty())
    throw DimensionError("one label per channel is required");
  os << "step,beta,total_bits";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  for (std::size_t r = 0; r < plane.size(); ++r) {
    os << plane[r].step << ',' << fmt_num(plane[r].beta) << ',' << fmt_num(plane[r].total_bits);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      os << ',' << fmt_num(m(static_cast<Eigen::Index>(r), c));
    os << '\n';
  }
}

double predictive_at(std::span<const InfoPlanePoint> plane, double total_bits) {
  if (plane.empty()) throw ContractError("empty information plane");
  if (total_bits <= plane.front().total_bits) return plane.front().predictive_bits;
  if (total_bits >= plane.back().total_bits) return plane.back().predictive_bits;
  for (std::size_t i = 1; i < plane.size(); ++i) {
    const auto& a = plane[i - 1];
    const auto& b = plane[i];
    if (total_bits <= b.total_bits) {
      double w = b.total_bits > a.total_bits
                     ? (total_bits - a.total_bits) / (b.total_bits - a.total_bits)
                     : 1.0;
      return a.predictive_bits + w * (b.predictive_bits - a.predictive_bits);
    }
  }
  return plane.back().predictive_bits;
}

const InfoPlanePoint& nearest_point(std::span<const InfoPlanePoint> plane, double target) {
  if (plane.empty()) throw ContractError("empty information plane");
  return *std::min_element(plane.begin(), plane.end(), [&](const auto& a, const auto& b) {
    return std::abs(a.total_bits - target) < std::abs(b.total_bits - target);
  });
}

std::string to_string(Similarity s) {
  return s == Similarity::Bhattacharyya ? "bhattacharyya" : "wasserstein";
}

Similarity parse_similarity(const std::string& text) {
  if (text == "bhattacharyya") return Similarity::Bhattacharyya;
  if (text == "wasserstein") return Similarity::Wasserstein;
  throw ContractError("unknown similarity measure: " + text);
}

double similarity(const GaussianCode& a, const GaussianCode& b, Similarity s) {
  if (s == Similarity::Bhattacharyya) return std::clamp(bhattacharyya_coefficient(a, b), 0.0, 1.0);
  return std::exp(-wasserstein2(a, b));
}

DistinguishabilityMatrix distinguishability(const ParamStore& store, const EncoderSpec& spec,
                                            std::size_t channel, std::span<const double> probes,
                                            Similarity s) {
  DistinguishabilityMatrix d;
  d.probes.assign(probes.begin(), probes.end());
  const auto n = static_cast<Eigen::Index>(probes.size());
  std::vector<GaussianCode> codes;
  for (double x : probes) codes.push_back(encode(x, store, spec, channel));
  d.m.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    d.m(a, a) = 1.0;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      double v = similarity(codes[static_cast<std::size_t>(a)], codes[static_cast<std::size_t>(b)], s);
      d.m(a, b) = v;
      d.m(b, a) = v;
    }
  }
  return d;
}

std::vector<double> quantile_probes(std::span<const double> values, std::size_t n) {
  if (values.empty()) throw ContractError("quantiles of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k) {
    double q = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    double pos = q * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double w = pos - static_cast<double>(lo);
    out.push_back(v[lo] + w * (v[hi] - v[lo]));
  }
  return out;
}

void write_disting_csv(std::ostream& os, const DistinguishabilityMatrix& d) {
  os << "probe";
  for (double p : d.probes) os << ',' << fmt_num(p);
  os << '\n';
  for (Eigen::Index a = 0; a < d.m.rows(); ++a) {
    os << fmt_num(d.probes[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < d.m.cols(); ++b) os << ',' << fmt_num(d.m(a, b));
    os << '\n';
  }
}

std::vector<std::size_t> top_k_channels(const InfoPlanePoint& point, std::size_t k,
                                        double threshold_bits) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < point.per_channel_bits.size(); ++i)
    if (point.per_channel_bits[i] >= threshold_bits) ids.push_back(i);
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return point.per_channel_bits[a] > point.per_channel_bits[b];
  });
  if (ids.size() > k) ids.resize(k);
  return ids;
}

}  // namespace dib
