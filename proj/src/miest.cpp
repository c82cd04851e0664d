#include "dib/miest.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

namespace dib {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

/// L(i, m) = log N(u_i; mu_m, exp(log_var_m)).
Matrix log_likelihoods(const Matrix& u, const CodeMatrix& codes) {
  const Eigen::Index K = u.rows(), M = codes.mu.rows(), D = u.cols();
  Matrix L(K, M);
  for (Eigen::Index m = 0; m < M; ++m) {
    const Eigen::RowVectorXd inv_var = (-codes.log_var.row(m).array()).exp().matrix();
    const double norm = codes.log_var.row(m).sum() + static_cast<double>(D) * kLog2Pi;
    const Eigen::ArrayXXd diff = u.rowwise() - codes.mu.row(m);
    L.col(m) = -0.5 * ((diff.square().rowwise() * inv_var.array()).rowwise().sum() + norm)
                          .matrix();
  }
  return L;
}

/// Lt(m, i) = log N(u_i; mu_m, exp(log_var_m)), expanded into matrix products
/// on coordinates centered at the mean code.
Matrix log_likelihoods_t(const Matrix& u, const CodeMatrix& codes) {
  const auto D = static_cast<double>(u.cols());
  const Eigen::RowVectorXd center = codes.mu.colwise().mean();
  const Matrix uc = u.rowwise() - center;
  const Matrix mc = codes.mu.rowwise() - center;
  const Matrix iv = (-codes.log_var.array()).exp().matrix();
  const Matrix a = mc.cwiseProduct(iv);
  const Vector c = (mc.cwiseProduct(a).rowwise().sum() + codes.log_var.rowwise().sum()).array() +
                   D * kLog2Pi;
  Matrix Lt = iv * uc.cwiseAbs2().transpose();
  Lt.noalias() -= 2.0 * a * uc.transpose();
  Lt.colwise() += c;
  return -0.5 * Lt;
}

/// log sum_m exp(v_m + log w_m) over m with w_m > 0.
double weighted_lse(const Eigen::Ref<const Eigen::RowVectorXd>& v,
                    const std::vector<double>& weights) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < v.size(); ++m)
    if (weights[m] > 0.0) mx = std::max(mx, v(m));
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Eigen::Index m = 0; m < v.size(); ++m)
    if (weights[m] > 0.0) s += weights[m] * std::exp(v(m) - mx);
  return mx + std::log(s);
}

std::vector<double> outcome_counts(const EvalBatch& batch) {
  std::vector<double> c(static_cast<std::size_t>(batch.codes.mu.rows()), 0.0);
  for (int o : batch.outcome) c[static_cast<std::size_t>(o)] += 1.0;
  return c;
}

void check_batch(const EvalBatch& batch) {
  if (batch.outcome.empty()) throw ContractError("eval batch: K must be at least 1");
  if (static_cast<std::size_t>(batch.u.rows()) != batch.outcome.size())
    throw DimensionError("eval batch: latent rows do not match item count");
  if (batch.u.cols() != batch.codes.mu.cols())
    throw DimensionError("eval batch: latent dimension does not match codes");
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Fixed left-to-right accumulation so results do not depend on threading.
MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double BoundsResult::lower_stderr() const {
  return batches ? lower_std / std::sqrt(static_cast<double>(batches)) : 0.0;
}

double BoundsResult::upper_stderr() const {
  return batches ? upper_std / std::sqrt(static_cast<double>(batches)) : 0.0;
}

double BoundsResult::tolerance() const { return 3.0 * (lower_stderr() + upper_stderr()); }

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double mx = std::max(a, b);
  return mx + std::log(std::exp(a - mx) + std::exp(b - mx));
}

struct Summands {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Both bound summands from one likelihood matrix. The item's own outcome is
/// split off so the leave-one-out denominator is formed without cancellation.
Summands batch_summands(const EvalBatch& batch, bool with_upper) {
  check_batch(batch);
  const auto K = static_cast<Eigen::Index>(batch.size());
  Matrix Lt = log_likelihoods_t(batch.u, batch.codes);
  const Eigen::Index M = Lt.rows();
  const std::vector<double> counts = outcome_counts(batch);
  const Eigen::Map<const Eigen::ArrayXd> w(counts.data(), M);
  const double inf = std::numeric_limits<double>::infinity();

  Vector own(K), others = Vector::Constant(K, -inf);
  for (Eigen::Index i = 0; i < K; ++i) {
    auto col = Lt.col(i);
    const int o = batch.outcome[static_cast<std::size_t>(i)];
    own(i) = col(o);
    if (M == 1) continue;
    col(o) = -inf;
    const double mx = col.maxCoeff();
    others(i) = mx + std::log(((col.array() - mx).exp() * w).sum());
  }

  Summands out;
  out.lower.resize(batch.size());
  if (with_upper) out.upper.resize(batch.size());
  const double log_k = std::log(static_cast<double>(K));
  const double log_k1 = K > 1 ? std::log(static_cast<double>(K - 1)) : 0.0;
  for (Eigen::Index i = 0; i < K; ++i) {
    const auto r = static_cast<std::size_t>(i);
    const double c = counts[static_cast<std::size_t>(batch.outcome[r])];
    out.lower[r] = own(i) - (log_add(others(i), own(i) + std::log(c)) - log_k);
    if (with_upper) {
      const double loo = c > 1.0 ? log_add(others(i), own(i) + std::log(c - 1.0)) : others(i);
      out.upper[r] = own(i) - (loo - log_k1);
    }
  }
  return out;
}

}  // namespace

std::vector<double> infonce_summands(const EvalBatch& batch) {
  return batch_summands(batch, false).lower;
}

std::vector<double> loo_summands(const EvalBatch& batch) {
  if (batch.size() < 2)
    throw ContractError("leave-one-out bound: K must be at least 2 (empty denominator)");
  return batch_summands(batch, true).upper;
}

BoundsResult infonce_loo_bounds(std::span<const EvalBatch> batches) {
  std::vector<double> lower, upper;
  for (const auto& b : batches) {
    if (b.size() < 2)
      throw ContractError("leave-one-out bound: K must be at least 2 (empty denominator)");
    const Summands sm = batch_summands(b, true);
    lower.push_back(nats_to_bits(mean_of(sm.lower)));
    upper.push_back(nats_to_bits(mean_of(sm.upper)));
  }
  const MeanStd lo = mean_std(lower), up = mean_std(upper);
  BoundsResult r;
  r.lower_bits = lo.mean;
  r.lower_std = lo.std;
  r.upper_bits = up.mean;
  r.upper_std = up.std;
  r.batches = batches.size();
  r.batch_size = batches.empty() ? 0 : batches.front().size();
  return r;
}

BoundsResult infonce_lower(std::span<const EvalBatch> batches) {
  std::vector<double> lower;
  for (const auto& b : batches) lower.push_back(nats_to_bits(mean_of(infonce_summands(b))));
  const MeanStd lo = mean_std(lower);
  BoundsResult r;
  r.lower_bits = lo.mean;
  r.lower_std = lo.std;
  r.batches = batches.size();
  r.batch_size = batches.empty() ? 0 : batches.front().size();
  return r;
}

BoundsResult loo_upper(std::span<const EvalBatch> batches) {
  std::vector<double> upper;
  for (const auto& b : batches) upper.push_back(nats_to_bits(mean_of(loo_summands(b))));
  const MeanStd up = mean_std(upper);
  BoundsResult r;
  r.upper_bits = up.mean;
  r.upper_std = up.std;
  r.batches = batches.size();
  r.batch_size = batches.empty() ? 0 : batches.front().size();
  return r;
}

std::vector<double> ChannelData::outcome_probabilities() const {
  std::vector<double> p(support(), 0.0);
  for (int o : item_outcome) p[static_cast<std::size_t>(o)] += 1.0;
  for (auto& v : p) v /= static_cast<double>(item_outcome.size());
  return p;
}

ChannelData make_channel_data(const ParamStore& store, const EncoderSpec& spec,
                              std::size_t channel, const Vector& x) {
  if (x.size() == 0) throw ContractError("channel data: empty dataset");
  std::map<double, int> index;
  ChannelData data;
  data.item_outcome.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    auto [it, inserted] = index.try_emplace(x(i), static_cast<int>(data.outcome_value.size()));
    if (inserted) data.outcome_value.push_back(x(i));
    data.item_outcome.push_back(it->second);
  }
  const Vector values = Eigen::Map<const Vector>(data.outcome_value.data(),
                                                 static_cast<Eigen::Index>(data.outcome_value.size()));
  data.codes = encode_batch(store, spec, channel, values);
  return data;
}

namespace {

EvalBatch make_batch(const ChannelData& data, const std::vector<std::size_t>& items, Rng& rng) {
  // Compact the codes to the outcomes present in this batch.
  std::map<int, int> remap;
  for (auto it : items) remap.try_emplace(data.item_outcome[it], 0);
  int next = 0;
  for (auto& [_, v] : remap) v = next++;

  EvalBatch b;
  const Eigen::Index D = data.codes.mu.cols();
  b.codes.mu.resize(next, D);
  b.codes.log_var.resize(next, D);
  for (const auto& [o, k] : remap) {
    b.codes.mu.row(k) = data.codes.mu.row(o);
    b.codes.log_var.row(k) = data.codes.log_var.row(o);
  }
  b.outcome.reserve(items.size());
  b.u.resize(static_cast<Eigen::Index>(items.size()), D);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int k = remap.at(data.item_outcome[items[i]]);
    b.outcome.push_back(k);
    for (Eigen::Index d = 0; d < D; ++d)
      b.u(static_cast<Eigen::Index>(i), d) =
          b.codes.mu(k, d) + std::exp(0.5 * b.codes.log_var(k, d)) * rng.normal();
  }
  return b;
}

std::vector<std::size_t> draw_items(std::size_t n, std::size_t K, Rng& rng) {
  std::vector<std::size_t> items;
  if (K > n) {
    items.reserve(K);
    for (std::size_t i = 0; i < K; ++i) items.push_back(rng.uniform_int(n));
    return items;
  }
  items.resize(n);
  for (std::size_t i = 0; i < n; ++i) items[i] = i;
  // Partial Fisher-Yates: the first K slots are a uniform subset.
  for (std::size_t i = 0; i < K && i + 1 < n; ++i) {
    const std::size_t j = i + rng.uniform_int(n - i);
    std::swap(items[i], items[j]);
  }
  items.resize(K);
  return items;
}

}  // namespace

std::vector<EvalBatch> draw_batches(const ChannelData& data, std::size_t K, std::size_t B,
                                    Rng& rng) {
  if (K == 0) throw ContractError("draw_batches: K must be positive");
  if (data.items() == 0) throw ContractError("draw_batches: empty dataset");
  std::vector<EvalBatch> out;
  out.reserve(B);
  for (std::size_t b = 0; b < B; ++b) out.push_back(make_batch(data, draw_items(data.items(), K, rng), rng));
  return out;
}

BoundsResult measure_bounds(const ChannelData& data, std::size_t K, std::size_t B, Rng& rng) {
  std::vector<double> lower, upper;
  lower.reserve(B);
  upper.reserve(B);
  for (std::size_t b = 0; b < B; ++b) {
    const EvalBatch batch = make_batch(data, draw_items(data.items(), K, rng), rng);
    if (batch.size() < 2)
      throw ContractError("leave-one-out bound: K must be at least 2 (empty denominator)");
    const Summands sm = batch_summands(batch, true);
    lower.push_back(nats_to_bits(mean_of(sm.lower)));
    upper.push_back(nats_to_bits(mean_of(sm.upper)));
  }
  const MeanStd lo = mean_std(lower), up = mean_std(upper);
  BoundsResult r;
  r.lower_bits = lo.mean;
  r.lower_std = lo.std;
  r.upper_bits = up.mean;
  r.upper_std = up.std;
  r.batches = B;
  r.batch_size = K;
  return r;
}

McEstimate mc_oracle(const ChannelData& data, Rng& rng, std::size_t n_samples) {
  if (data.support() > kMcMaxSupport)
    throw ContractError("mc_oracle: support of " + std::to_string(data.support()) +
                        " outcomes is not enumerable; the oracle needs a finite p(u) mixture");
  if (n_samples < 2) throw ContractError("mc_oracle: need at least 2 samples");
  if (data.items() == 0) throw ContractError("mc_oracle: empty dataset");

  const std::vector<double> p = data.outcome_probabilities();
  const Eigen::Index D = data.codes.mu.cols();
  constexpr std::size_t kChunk = 4096;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t start = 0; start < n_samples; start += kChunk) {
    const std::size_t n = std::min(kChunk, n_samples - start);
    std::vector<int> outcome(n);
    Matrix u(static_cast<Eigen::Index>(n), D);
    for (std::size_t s = 0; s < n; ++s) {
      const int o = data.item_outcome[rng.uniform_int(data.items())];
      outcome[s] = o;
      for (Eigen::Index d = 0; d < D; ++d)
        u(static_cast<Eigen::Index>(s), d) =
            data.codes.mu(o, d) + std::exp(0.5 * data.codes.log_var(o, d)) * rng.normal();
    }
    const Matrix L = log_likelihoods(u, data.codes);
    for (std::size_t s = 0; s < n; ++s) {
      const auto row = L.row(static_cast<Eigen::Index>(s));
      const double v = row(outcome[s]) - weighted_lse(row, p);
      sum += v;
      sum_sq += v * v;
    }
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {nats_to_bits(mean), nats_to_bits(std::sqrt(var / n)), n_samples};
}

OutcomeContribution contribution_in_batch(const EvalBatch& batch, std::size_t i) {
  check_batch(batch);
  if (i >= batch.size()) throw ContractError("contribution_in_batch: item out of range");
  if (batch.size() < 2) throw ContractError("contribution_in_batch: K must be at least 2");
  const Matrix L = log_likelihoods(batch.u.row(static_cast<Eigen::Index>(i)), batch.codes);
  std::vector<double> counts = outcome_counts(batch);
  const auto row = L.row(0);
  const int o = batch.outcome[i];
  OutcomeContribution c;
  c.lower_bits = nats_to_bits(row(o) - (weighted_lse(row, counts) -
                                        std::log(static_cast<double>(batch.size()))));
  counts[static_cast<std::size_t>(o)] -= 1.0;
  c.upper_bits = nats_to_bits(row(o) - (weighted_lse(row, counts) -
                                        std::log(static_cast<double>(batch.size() - 1))));
  return c;
}

OutcomeContribution per_outcome_contribution(const GaussianCode& probe, const ChannelData& data,
                                             std::size_t K, std::size_t B, Rng& rng) {
  if (K < 2) throw ContractError("per_outcome_contribution: K must be at least 2");
  if (B == 0) throw ContractError("per_outcome_contribution: B must be positive");
  if (probe.dim() != data.codes.mu.cols())
    throw DimensionError("per_outcome_contribution: probe dimension mismatch");
  std::vector<double> counts(data.support() + 1);
  double lower = 0.0, upper = 0.0;
  Matrix u(1, probe.dim());
  CodeMatrix all;
  all.mu.resize(static_cast<Eigen::Index>(data.support() + 1), probe.dim());
  all.log_var.resize(all.mu.rows(), probe.dim());
  all.mu.topRows(static_cast<Eigen::Index>(data.support())) = data.codes.mu;
  all.log_var.topRows(static_cast<Eigen::Index>(data.support())) = data.codes.log_var;
  all.mu.bottomRows(1) = probe.mu.transpose();
  all.log_var.bottomRows(1) = probe.log_var.transpose();
  const double log_k = std::log(static_cast<double>(K));
  const double log_k1 = std::log(static_cast<double>(K - 1));
  for (std::size_t b = 0; b < B; ++b) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (auto item : draw_items(data.items(), K - 1, rng))
      counts[static_cast<std::size_t>(data.item_outcome[item])] += 1.0;
    u.row(0) = sample(probe, rng).transpose();
    const Matrix L = log_likelihoods(u, all);
    const auto row = L.row(0);
    const double self = row(row.size() - 1);
    upper += self - (weighted_lse(row, counts) - log_k1);
    counts.back() = 1.0;
    lower += self - (weighted_lse(row, counts) - log_k);
  }
  const double n = static_cast<double>(B);
  return {nats_to_bits(lower / n), nats_to_bits(upper / n)};
}

CodeMatrix OrthogonalScheme::codes() const {
  const auto M = static_cast<Eigen::Index>(support());
  const auto D = static_cast<Eigen::Index>(latent_dim);
  if (entropy_bits < 0 || D < M)
    throw ContractError("orthogonal scheme: latent dimension " + std::to_string(latent_dim) +
                        " cannot hold " + std::to_string(support()) + " orthogonal means");
  CodeMatrix c;
  c.mu = Matrix::Zero(M, D);
  for (Eigen::Index m = 0; m < M; ++m) c.mu(m, m) = separation;
  c.log_var = Matrix::Zero(M, D);
  return c;
}

ChannelData OrthogonalScheme::dataset(std::size_t n, Rng& rng) const {
  ChannelData data;
  data.codes = codes();
  for (std::size_t m = 0; m < support(); ++m) data.outcome_value.push_back(static_cast<double>(m));
  data.item_outcome.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    data.item_outcome.push_back(static_cast<int>(rng.uniform_int(support())));
  return data;
}

bool BenchRow::sandwiched() const {
  constexpr double kRoundoff = 1e-12;
  const double lo_tol = 3.0 * (bounds.lower_stderr() + mc.stderr_bits) + kRoundoff;
  const double up_tol = 3.0 * (bounds.upper_stderr() + mc.stderr_bits) + kRoundoff;
  return bounds.lower_bits <= mc.bits + lo_tol && mc.bits <= bounds.upper_bits + up_tol;
}

std::vector<BenchRow> bench_orthogonal(const BenchConfig& config) {
  std::vector<BenchRow> rows;
  const Rng root(config.seed);
  auto dim_for = [&](int h) {
    return config.latent_dim ? config.latent_dim
                             : std::max<std::size_t>(32, std::size_t{1} << h);
  };
  for (int h : config.entropy_bits)
    if ((std::size_t{1} << h) > dim_for(h))
      throw ContractError("bench_orthogonal: D=" + std::to_string(dim_for(h)) +
                          " < 2^H=" + std::to_string(std::size_t{1} << h));
  for (int h : config.entropy_bits) {
    const std::size_t dim = dim_for(h);
    // One fixed dataset per entropy level, shared by every separation.
    Rng data_rng = root.split(static_cast<std::uint64_t>(h));
    const OrthogonalScheme base{h, 0.0, dim};
    const ChannelData fixed = base.dataset(config.dataset_size, data_rng);
    for (std::size_t di = 0; di < config.separations.size(); ++di) {
      ChannelData data = fixed;
      data.codes = OrthogonalScheme{h, config.separations[di], dim}.codes();
      Rng mc_rng = root.split(1000003ULL * static_cast<std::uint64_t>(h) + di + 17);
      const McEstimate mc = mc_oracle(data, mc_rng, config.mc_samples);
      for (std::size_t ki = 0; ki < config.batch_sizes.size(); ++ki) {
        Rng rng = root.split(0x5eed0000ULL + 7919ULL * static_cast<std::uint64_t>(h) +
                             131ULL * di + ki);
        BenchRow row;
        row.entropy_bits = h;
        row.separation = config.separations[di];
        row.bounds = measure_bounds(data, config.batch_sizes[ki], config.batches, rng);
        row.mc = mc;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
  os << "H_bits,d,K,B,lower_bits,lower_std,upper_bits,upper_std,mc_bits,mc_stderr\n";
  const auto prec = os.precision(10);
  for (const auto& r : rows) {
    os << r.entropy_bits << ',' << r.separation << ',' << r.bounds.batch_size << ','
       << r.bounds.batches << ',' << r.bounds.lower_bits << ',' << r.bounds.lower_std << ','
       << r.bounds.upper_bits << ',' << r.bounds.upper_std << ',' << r.mc.bits << ','
       << r.mc.stderr_bits << '\n';
  }
  os.precision(prec);
}

}  // namespace dib
