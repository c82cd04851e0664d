#include "dib/glassfeat.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace dib::glass {

char to_char(ParticleType t) { return t == ParticleType::A ? 'A' : 'B'; }

const std::vector<double>& feature_radii() {
  static const std::vector<double> radii = [] {
    std::vector<double> r(kRadiiPerType);
    for (std::size_t k = 0; k < kRadiiPerType; ++k)
      r[k] = kRadiusMin + static_cast<double>(k) * radius_spacing();
    return r;
  }();
  return radii;
}

double radius_spacing() {
  return (kRadiusMax - kRadiusMin) / static_cast<double>(kRadiiPerType - 1);
}

double window_width() { return 0.5 * radius_spacing(); }

double feature_radius(std::size_t f) { return feature_radii().at(f % kRadiiPerType); }

ParticleType feature_type(std::size_t f) {
  return f < kRadiiPerType ? ParticleType::A : ParticleType::B;
}

std::string feature_name(std::size_t f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "G%c_%.4f", to_char(feature_type(f)), feature_radius(f));
  return buf;
}

double structure_function(const Neighborhood& nb, double r, double delta, ParticleType t) {
  const double inv = 1.0 / (2.0 * delta * delta);
  double g = 0.0;
  for (const Particle& p : nb.particles) {
    if (p.type != t) continue;
    const double R = std::hypot(p.x, p.y);
    if (R > kTruncationRadius) continue;
    g += std::exp(-(R - r) * (R - r) * inv);
  }
  return g;
}

Vector featurize(const Neighborhood& nb) {
  Vector f = Vector::Zero(kFeatureCount);
  const auto& radii = feature_radii();
  const double inv = 1.0 / (2.0 * window_width() * window_width());
  for (const Particle& p : nb.particles) {
    const double R = std::hypot(p.x, p.y);
    if (R > kTruncationRadius) continue;
    const std::size_t offset = p.type == ParticleType::A ? 0 : kRadiiPerType;
    for (std::size_t k = 0; k < kRadiiPerType; ++k)
      f(static_cast<Eigen::Index>(offset + k)) += std::exp(-(R - radii[k]) * (R - radii[k]) * inv);
  }
  return f;
}

Matrix featurize_all(std::span<const Neighborhood> nbs) {
  Matrix out(static_cast<Eigen::Index>(nbs.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < nbs.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = featurize(nbs[i]).transpose();
  return out;
}

Matrix NormStats::apply(const Matrix& features) const {
  Matrix out(features.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(kept[j]);
    out.col(static_cast<Eigen::Index>(j)) =
        (features.col(c).array() - mean(c)) / std(c);
  }
  return out;
}

NormStats fit_norm_stats(const Matrix& train) {
  if (train.rows() < 2) throw ContractError("norm stats: need at least 2 training rows");
  NormStats s;
  const double n = static_cast<double>(train.rows());
  s.mean = train.colwise().mean().transpose();
  s.std.resize(train.cols());
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    s.std(c) = std::sqrt((train.col(c).array() - s.mean(c)).square().sum() / n);
    if (s.std(c) > 1e-12 * std::max(1.0, std::abs(s.mean(c)))) {
      s.kept.push_back(static_cast<std::size_t>(c));
    } else {
      s.dropped.push_back(static_cast<std::size_t>(c));
      std::cerr << "warning: dropping zero-variance feature column " << c << '\n';
    }
  }
  return s;
}

void write_norm_stats(std::ostream& os, const NormStats& stats) {
  nlohmann::json j;
  j["means"] = std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size());
  j["stds"] = std::vector<double>(stats.std.data(), stats.std.data() + stats.std.size());
  j["radii"] = feature_radii();
  j["kept"] = stats.kept;
  os << j.dump(2) << '\n';
}

NormStats read_norm_stats(std::istream& is) {
  const nlohmann::json j = nlohmann::json::parse(is);
  NormStats s;
  const auto means = j.at("means").get<std::vector<double>>();
  const auto stds = j.at("stds").get<std::vector<double>>();
  if (means.size() != stds.size()) throw ContractError("norm stats: means/stds length mismatch");
  s.mean = Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
  s.std = Eigen::Map<const Vector>(stds.data(), static_cast<Eigen::Index>(stds.size()));
  s.kept = j.at("kept").get<std::vector<std::size_t>>();
  for (std::size_t c = 0, k = 0; c < means.size(); ++c) {
    if (k < s.kept.size() && s.kept[k] == c) ++k;
    else s.dropped.push_back(c);
  }
  return s;
}

Rdf compute_rdf(std::span<const Neighborhood> nbs, ParticleType neighbor, double bin_width,
                double r_max) {
  if (nbs.empty()) throw ContractError("compute_rdf: empty dataset");
  if (bin_width <= 0.0 || r_max <= 0.0) throw ContractError("compute_rdf: bad binning");
  const auto bins = static_cast<std::size_t>(std::floor(r_max / bin_width + 1e-9));
  std::vector<double> counts(bins, 0.0);
  double total = 0.0;
  for (const Neighborhood& nb : nbs) {
    for (const Particle& p : nb.particles) {
      if (p.type != neighbor) continue;
      const double R = std::hypot(p.x, p.y);
      if (R >= r_max) continue;
      total += 1.0;
      const auto b = static_cast<std::size_t>(R / bin_width);
      if (b < bins) counts[b] += 1.0;
    }
  }
  const double n = static_cast<double>(nbs.size());
  const double density = total / (n * std::numbers::pi * r_max * r_max);
  Rdf rdf;
  rdf.r.resize(bins);
  rdf.g.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) * bin_width, hi = lo + bin_width;
    rdf.r[b] = 0.5 * (lo + hi);
    const double area = std::numbers::pi * (hi * hi - lo * lo);
    rdf.g[b] = density > 0.0 ? counts[b] / (n * area * density) : 0.0;
  }
  return rdf;
}

namespace {

double accuracy(const Matrix& x, const Vector& y, const Vector& w, double b) {
  const Vector score = (x * w).array() + b;
  double correct = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) correct += ((score(i) > 0.0) == (y(i) > 0.5));
  return correct / static_cast<double>(y.size());
}

void check_two_classes(const Vector& y, const char* which) {
  const double pos = (y.array() > 0.5).count();
  if (pos == 0 || pos == static_cast<double>(y.size()))
    throw ContractError(std::string("linear_baseline: ") + which + " split has a single class");
}

}  // namespace

BaselineResult linear_baseline(const Matrix& train_x, const Vector& train_y, const Matrix& val_x,
                               const Vector& val_y, std::size_t iterations) {
  if (train_x.rows() != train_y.size() || val_x.rows() != val_y.size() ||
      train_x.cols() != val_x.cols())
    throw DimensionError("linear_baseline: inconsistent shapes");
  check_two_classes(train_y, "training");
  if (val_y.size() == 0) throw ContractError("linear_baseline: empty validation split");

  const Vector s = 2.0 * train_y.array() - 1.0;
  const double n = static_cast<double>(train_x.rows());
  BaselineResult best;
  best.accuracy = -1.0;
  for (double penalty : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    Vector w = Vector::Zero(train_x.cols()), w_avg = w;
    double b = 0.0, b_avg = 0.0;
    for (std::size_t t = 1; t <= iterations; ++t) {
      const Vector margin = s.array() * ((train_x * w).array() + b);
      Vector coef = Vector::Zero(s.size());
      for (Eigen::Index i = 0; i < s.size(); ++i)
        if (margin(i) < 1.0) coef(i) = -s(i) / n;
      const Vector gw = penalty * w + train_x.transpose() * coef;
      const double gb = coef.sum();
      const double step = 5.0 / std::sqrt(static_cast<double>(t));
      w -= step * gw;
      b -= step * gb;
      const double k = 1.0 / static_cast<double>(t);
      w_avg += k * (w - w_avg);
      b_avg += k * (b - b_avg);
    }
    const double acc = accuracy(val_x, val_y, w_avg, b_avg);
    if (acc > best.accuracy) best = {acc, penalty, w_avg, b_avg};
  }
  return best;
}

std::vector<Neighborhood> read_neighborhoods(std::istream& is) {
  std::vector<Neighborhood> out;
  std::string line;
  std::size_t lineno = 0;
  auto parse_type = [&](const std::string& t) {
    if (t == "A") return ParticleType::A;
    if (t == "B") return ParticleType::B;
    throw DatasetFormatError(lineno, "unknown particle type '" + t + "'");
  };
  auto next_content = [&](std::string& l) {
    while (std::getline(is, l)) {
      ++lineno;
      if (auto h = l.find('#'); h != std::string::npos) l.erase(h);
      if (l.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  while (next_content(line)) {
    std::istringstream hs(line);
    std::string tag, center, extra;
    long long count = -1;
    int label = -1;
    if (!(hs >> tag >> count >> center >> label) || tag != "N" || count < 0 || (hs >> extra))
      throw DatasetFormatError(lineno, "expected header 'N <count> <center_type> <label>'");
    if (label != 0 && label != 1) throw DatasetFormatError(lineno, "label must be 0 or 1");
    Neighborhood nb;
    nb.center_type = parse_type(center);
    nb.label = label;
    nb.particles.reserve(static_cast<std::size_t>(count));
    for (long long k = 0; k < count; ++k) {
      if (!next_content(line))
        throw DatasetFormatError(lineno, "unexpected end of file inside record");
      std::istringstream ps(line);
      Particle p;
      std::string type;
      if (!(ps >> p.x >> p.y >> type) || (ps >> extra))
        throw DatasetFormatError(lineno, "expected particle row '<x> <y> <type>'");
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw DatasetFormatError(lineno, "non-finite particle position");
      p.type = parse_type(type);
      nb.particles.push_back(p);
    }
    out.push_back(std::move(nb));
  }
  return out;
}

void write_neighborhoods(std::ostream& os, std::span<const Neighborhood> nbs) {
  char buf[96];
  for (const Neighborhood& nb : nbs) {
    os << "N " << nb.particles.size() << ' ' << to_char(nb.center_type) << ' ' << nb.label << '\n';
    for (const Particle& p : nb.particles) {
      std::snprintf(buf, sizeof(buf), "%.17g %.17g %c\n", p.x, p.y, to_char(p.type));
      os << buf;
    }
  }
}

Dataset split_dataset(std::vector<Neighborhood> all, std::uint64_t seed,
                      const std::optional<std::vector<std::size_t>>& val_indices) {
  if (all.size() < 2) throw ContractError("split_dataset: need at least 2 records");
  std::vector<bool> is_val(all.size(), false);
  if (val_indices) {
    for (auto i : *val_indices) {
      if (i >= all.size()) throw ContractError("split file: index " + std::to_string(i) + " out of range");
      is_val[i] = true;
    }
  } else {
    const std::size_t groups = (all.size() + 1) / 2;
    std::vector<std::size_t> order(groups);
    for (std::size_t g = 0; g < groups; ++g) order[g] = g;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_val_groups = static_cast<std::size_t>(
        std::llround((1.0 - kTrainFraction) * static_cast<double>(groups)));
    for (std::size_t k = 0; k < n_val_groups; ++k) {
      is_val[2 * order[k]] = true;
      if (2 * order[k] + 1 < all.size()) is_val[2 * order[k] + 1] = true;
    }
  }
  Dataset d;
  for (std::size_t i = 0; i < all.size(); ++i)
    (is_val[i] ? d.val : d.train).push_back(std::move(all[i]));
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& split_file) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset " + path.string());
  auto all = read_neighborhoods(is);
  std::optional<std::vector<std::size_t>> val;
  if (split_file) {
    std::ifstream ss(*split_file);
    if (!ss) throw std::runtime_error("cannot open split file " + split_file->string());
    val.emplace();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        val->push_back(std::stoul(line));
      } catch (const std::exception&) {
        throw DatasetFormatError(lineno, "split file: expected a record index");
      }
    }
  }
  return split_dataset(std::move(all), seed, val);
}

std::vector<Neighborhood> synth_dataset(std::uint64_t seed, std::size_t n, double difficulty) {
  if (n < 2) throw ContractError("synth_dataset: n must be at least 2");
  constexpr double kDensity = 1.0;
  constexpr double kCore = 0.6;
  constexpr double kShellGap = 0.12;
  constexpr double kTypeAFraction = 0.65;
  const double shell = feature_radius(kSynthInformativeFeature);
  const auto shift = static_cast<int>(std::lround(4.0 * std::max(0.0, difficulty)));
  const double area = std::numbers::pi * kTruncationRadius * kTruncationRadius;

  Rng root(seed);
  std::vector<Neighborhood> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.split(i);
    Neighborhood& nb = out[i];
    nb.center_type = ParticleType::A;
    nb.label = (i % 2 == 0) ? 1 : 0;
    // Fixed expected count, +-10% uniform jitter.
    const auto background = static_cast<std::size_t>(
        std::lround(kDensity * area * (0.9 + 0.2 * rng.uniform())));
    for (std::size_t k = 0; k < background;) {
      const double x = (2.0 * rng.uniform() - 1.0) * kTruncationRadius;
      const double y = (2.0 * rng.uniform() - 1.0) * kTruncationRadius;
      const double R = std::hypot(x, y);
      const ParticleType t = rng.uniform() < kTypeAFraction ? ParticleType::A : ParticleType::B;
      if (R > kTruncationRadius) continue;
      ++k;
      if (R < kCore || std::abs(R - shell) < kShellGap) continue;
      nb.particles.push_back({x, y, t});
    }
    int on_shell = static_cast<int>(rng.uniform_int(2));
    if (nb.label == 1) on_shell += shift;
    for (int k = 0; k < on_shell; ++k) {
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      nb.particles.push_back({shell * std::cos(theta), shell * std::sin(theta), ParticleType::A});
    }
  }
  return out;
}

void write_feature_csv(std::ostream& os, const Matrix& features, const Vector& labels) {
  if (features.rows() != labels.size()) throw DimensionError("feature csv: row count mismatch");
  for (Eigen::Index c = 0; c < features.cols(); ++c)
    os << (features.cols() == static_cast<Eigen::Index>(kFeatureCount)
               ? feature_name(static_cast<std::size_t>(c))
               : "f" + std::to_string(c))
       << ',';
  os << "label\n";
  char buf[32];
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", features(r, c));
      os << buf << ',';
    }
    os << static_cast<int>(labels(r)) << '\n';
  }
}

Vector labels_of(std::span<const Neighborhood> nbs) {
  Vector y(static_cast<Eigen::Index>(nbs.size()));
  for (std::size_t i = 0; i < nbs.size(); ++i) y(static_cast<Eigen::Index>(i)) = nbs[i].label;
  return y;
}

}  // namespace dib::glass
