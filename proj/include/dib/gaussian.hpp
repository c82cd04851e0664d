#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace dib {

inline constexpr double kLogVarMin = -20.0;
inline constexpr double kLogVarMax = 20.0;
inline constexpr double kLn2 = std::numbers::ln2;

inline double nats_to_bits(double nats) { return nats / kLn2; }
inline double bits_to_nats(double bits) { return bits * kLn2; }

/// Diagonal Gaussian in latent space; log_var is the natural-log variance.
template <typename Scalar>
struct GaussianCodeT {
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  VectorType mu;
  VectorType log_var;

  Eigen::Index dim() const { return mu.size(); }
  VectorType stddev() const { return (log_var.array() * Scalar(0.5)).exp(); }
};

using GaussianCode = GaussianCodeT<double>;

/// Builds a code with log_var clamped to [kLogVarMin, kLogVarMax].
template <typename DerivedMu, typename DerivedLv>
GaussianCodeT<typename DerivedMu::Scalar> make_code(const Eigen::MatrixBase<DerivedMu>& mu,
                                                    const Eigen::MatrixBase<DerivedLv>& log_var) {
  using Scalar = typename DerivedMu::Scalar;
  GaussianCodeT<Scalar> code;
  code.mu = mu;
  code.log_var = log_var.array().max(Scalar(kLogVarMin)).min(Scalar(kLogVarMax)).matrix();
  return code;
}

template <typename Scalar>
GaussianCodeT<Scalar> standard_prior(Eigen::Index dim) {
  using V = typename GaussianCodeT<Scalar>::VectorType;
  return {V::Zero(dim), V::Zero(dim)};
}

/// KL(N(mu, diag exp(log_var)) || N(0, I)) in nats.
template <typename DerivedMu, typename DerivedLv>
typename DerivedMu::Scalar kl_to_prior(const Eigen::MatrixBase<DerivedMu>& mu,
                                       const Eigen::MatrixBase<DerivedLv>& log_var) {
  using Scalar = typename DerivedMu::Scalar;
  return Scalar(0.5) *
         (mu.array().square() + log_var.array().exp() - Scalar(1) - log_var.array()).sum();
}

template <typename Scalar>
Scalar kl_to_prior(const GaussianCodeT<Scalar>& code) {
  return kl_to_prior(code.mu, code.log_var);
}

/// log N(u; mu, diag exp(log_var)) in nats.
template <typename DerivedU, typename DerivedMu, typename DerivedLv>
typename DerivedU::Scalar log_density(const Eigen::MatrixBase<DerivedU>& u,
                                      const Eigen::MatrixBase<DerivedMu>& mu,
                                      const Eigen::MatrixBase<DerivedLv>& log_var) {
  using Scalar = typename DerivedU::Scalar;
  const Scalar log_2pi = Scalar(std::log(2.0 * std::numbers::pi));
  return Scalar(-0.5) *
         ((u - mu).array().square() * (-log_var.array()).exp() + log_var.array() + log_2pi)
             .sum();
}

/// Bhattacharyya coefficient between two diagonal Gaussians; 1 for identical
/// codes, tending to 0 as they separate.
template <typename Scalar>
Scalar bhattacharyya_coefficient(const GaussianCodeT<Scalar>& a, const GaussianCodeT<Scalar>& b) {
  const auto va = a.log_var.array().exp();
  const auto vb = b.log_var.array().exp();
  const auto vm = (va + vb) * Scalar(0.5);
  const Scalar mahal = ((a.mu - b.mu).array().square() / vm).sum() * Scalar(0.125);
  const Scalar logdet =
      Scalar(0.5) * (vm.log() - Scalar(0.5) * (a.log_var.array() + b.log_var.array())).sum();
  return std::clamp(std::exp(-(mahal + logdet)), Scalar(0), Scalar(1));
}

/// 2-Wasserstein distance between two diagonal Gaussians.
template <typename Scalar>
Scalar wasserstein2(const GaussianCodeT<Scalar>& a, const GaussianCodeT<Scalar>& b) {
  const Scalar mean_term = (a.mu - b.mu).squaredNorm();
  const Scalar cov_term = (a.stddev() - b.stddev()).squaredNorm();
  return std::sqrt(mean_term + cov_term);
}

}  // namespace dib
