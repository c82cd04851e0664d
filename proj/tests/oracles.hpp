#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dib/tensor.hpp"

namespace dib::oracle {

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst_path;
  std::size_t checked = 0;
};

/// Relative error with an absolute floor so vanishing gradients compare on
/// an absolute scale.
inline double rel_error(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central differences of `f` against `analytic` gradients, coordinate by
/// coordinate. When the two one-sided differences disagree a kink lies inside
/// the stencil and the step is shrunk. `stride` > 1 checks every stride-th
/// coordinate (offset by `offset`).
inline GradCheck check_gradients(ParamStore& store, const std::map<std::string, Tensor>& analytic,
                                 const std::function<double()>& f, double h = 1e-4,
                                 std::size_t stride = 1, std::size_t offset = 0) {
  GradCheck out;
  const double f0 = f();
  for (auto& [path, value] : store.params()) {
    const Tensor& g = analytic.at(path);
    for (std::size_t i = offset % stride; i < value.size(); i += stride) {
      const double orig = value[i];
      double step = h;
      double numeric = 0.0;
      for (int attempt = 0; attempt < 4; ++attempt, step *= 0.1) {
        value[i] = orig + step;
        const double fp = f();
        value[i] = orig - step;
        const double fm = f();
        value[i] = orig;
        numeric = (fp - fm) / (2.0 * step);
        const double right = (fp - f0) / step;
        const double left = (f0 - fm) / step;
        if (rel_error(right, left, 1e-3) < 1e-1) break;
      }
      double e = rel_error(g[i], numeric);
      ++out.checked;
      if (e > out.max_rel_error) {
        out.max_rel_error = e;
        out.worst_path = path + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

/// Plain loop evaluation of a dense layer stack: y = act(x W + b).
inline Matrix dense_layer(const Matrix& x, const Matrix& w, const RowVector& b,
                          const std::function<double(double)>& act) {
  Matrix y(x.rows(), w.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      double s = b(c);
      for (Eigen::Index k = 0; k < x.cols(); ++k) s += x(r, k) * w(k, c);
      y(r, c) = act(s);
    }
  return y;
}

/// Diagonal Gaussian KL to N(0, I) by Monte Carlo: mean of log r(u) - log p(u), u ~ r.
inline double mc_kl(const Vector& mu, const Vector& log_var, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const Vector sd = (0.5 * log_var.array()).exp();
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double log_r = 0.0, log_p = 0.0;
    for (Eigen::Index d = 0; d < mu.size(); ++d) {
      const double eps = nd(gen);
      const double u = mu(d) + sd(d) * eps;
      log_r += -0.5 * eps * eps - 0.5 * log_var(d);
      log_p += -0.5 * u * u;
    }
    total += log_r - log_p;
  }
  return total / static_cast<double>(n);
}

/// Entropy in bits of a discrete distribution given by counts.
inline double entropy_bits(const std::vector<double>& counts) {
  double n = 0.0;
  for (double c : counts) n += c;
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= c / n * std::log2(c / n);
  return h;
}

}  // namespace dib::oracle
