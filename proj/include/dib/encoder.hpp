#pragma once

#include <string>

#include "dib/gaussian.hpp"
#include "dib/mlp.hpp"
#include "dib/rng.hpp"
#include "dib/tape.hpp"

namespace dib {

enum class EncoderKind { BinaryTable, ScalarMlp, SharedMlp };

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& text);

/// One compression channel X_i -> U_i.
struct EncoderSpec {
  EncoderKind kind = EncoderKind::BinaryTable;
  std::size_t latent_dim = 8;
  /// Scalar input -> 2 * latent_dim head (mu | log_var); unused for binary tables.
  MlpArch arch;

  static EncoderSpec binary_table(std::size_t latent_dim = 8);
  /// Default per-feature encoder: 2 x 128 tanh, 32-dim latent.
  static EncoderSpec scalar_mlp(std::size_t latent_dim = 32, std::size_t width = 128,
                                std::size_t hidden = 2);
  static EncoderSpec shared_mlp(std::size_t latent_dim = 32, std::size_t width = 128,
                                std::size_t hidden = 2);
};

/// Std of the encoder output head at initialization; training starts near the prior.
inline constexpr double kEncoderHeadInitStd = 1e-2;

/// Parameter prefix for `channel` ("enc/ch003", or "enc/shared" for shared MLPs).
std::string encoder_prefix(const EncoderSpec& spec, std::size_t channel);

/// Adds the channel's parameters to `store` (idempotent for shared encoders).
void init_encoder(ParamStore& store, const EncoderSpec& spec, std::size_t channel, Rng& rng);

GaussianCode encode_binary(int x, const ParamStore& store, const EncoderSpec& spec,
                           std::size_t channel);
GaussianCode encode_scalar(double x, const ParamStore& store, const EncoderSpec& spec,
                           std::size_t channel);
/// Dispatches on spec.kind; binary tables require x in {0, 1}.
GaussianCode encode(double x, const ParamStore& store, const EncoderSpec& spec,
                    std::size_t channel);

/// Codes for a column of inputs, one row per input (log_var clamped).
struct CodeMatrix {
  Matrix mu;
  Matrix log_var;

  GaussianCode row(Eigen::Index i) const {
    return {mu.row(i).transpose(), log_var.row(i).transpose()};
  }
};
CodeMatrix encode_batch(const ParamStore& store, const EncoderSpec& spec, std::size_t channel,
                        const Vector& x);

/// u = mu + exp(log_var / 2) * eps with fresh eps ~ N(0, I).
Vector sample(const GaussianCode& code, Rng& rng);

/// Graph-recorded counterparts used by the training objective.
struct CodeVars {
  Var mu;
  Var log_var;
};
CodeVars encode_on_tape(ParamStore& store, Tape& tape, const EncoderSpec& spec,
                        std::size_t channel, const Vector& x);
/// Reparameterized sample; eps has the shape of code.mu.
Var sample_on_tape(const CodeVars& code, const Matrix& eps);
/// Per-row KL to the standard normal prior in nats (batch x 1).
Var kl_on_tape(const CodeVars& code);

}  // namespace dib
