#pragma once

#include <string>
#include <vector>

#include "dib/rng.hpp"
#include "dib/tape.hpp"
#include "dib/tensor.hpp"

namespace dib {

enum class Activation { Identity, Tanh, LeakyRelu };

struct LayerSpec {
  std::size_t units = 0;
  Activation activation = Activation::Identity;
  double alpha = 0.3;  ///< leaky-ReLU slope

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct MlpArch {
  std::size_t input_dim = 0;
  std::vector<LayerSpec> layers;

  std::size_t output_dim() const { return layers.empty() ? input_dim : layers.back().units; }
  friend bool operator==(const MlpArch&, const MlpArch&) = default;
};

/// `hidden` layers of `width` units with `act`, then an identity head of `out` units.
MlpArch make_mlp(std::size_t input_dim, std::size_t hidden, std::size_t width, Activation act,
                 std::size_t out, double alpha = 0.3);

/// "tanh", "identity", "leaky_relu:0.3".
std::string to_string(const LayerSpec& layer);
LayerSpec parse_layer(const std::string& text);
/// "in=80;256:leaky_relu:0.3;256:leaky_relu:0.3;1:identity"
std::string to_string(const MlpArch& arch);
MlpArch parse_arch(const std::string& text);

std::string weight_path(const std::string& prefix, std::size_t layer);
std::string bias_path(const std::string& prefix, std::size_t layer);

/// Glorot-normal weights and zero biases. The final layer uses `head_std`
/// instead when it is positive.
void init_mlp(ParamStore& store, const std::string& prefix, const MlpArch& arch, Rng& rng,
              double head_std = -1.0);

/// Records the forward pass on `input`'s tape. Input is (batch x input_dim).
Var mlp_forward(ParamStore& store, Var input, const MlpArch& arch, const std::string& prefix);

/// Graph-free evaluation for frozen parameters.
Matrix mlp_apply(const ParamStore& store, const Matrix& input, const MlpArch& arch,
                 const std::string& prefix);

}  // namespace dib
