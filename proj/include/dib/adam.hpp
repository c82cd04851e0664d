#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dib/tensor.hpp"

namespace dib {

struct AdamState {
  explicit AdamState(double lr = 1e-3) : learning_rate(lr) {}

  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  std::uint64_t step = 0;
  double learning_rate;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update of every parameter in `store` using the
/// store's gradient buffer. Throws NonFiniteGradient naming the first bad
/// parameter path; nothing is modified in that case.
void adam_step(ParamStore& store, AdamState& state);

}  // namespace dib
