#include "dib/adam.hpp"

#include <cmath>

namespace dib {

void adam_step(ParamStore& store, AdamState& state) {
  for (const auto& [path, g] : store.grads())
    if (!g.all_finite()) throw NonFiniteGradient("adam: non-finite gradient for '" + path + "'");

  const auto t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  for (auto& [path, p] : store.params()) {
    const Tensor& g = store.grad(path);
    if (g.shape() != p.shape())
      throw DimensionError("adam: gradient shape mismatch for '" + path + "'");
    auto [m_it, m_new] = state.first_moment.try_emplace(path, Tensor::zeros_like(p));
    auto [v_it, v_new] = state.second_moment.try_emplace(path, Tensor::zeros_like(p));
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
  ++state.step;
}

}  // namespace dib
