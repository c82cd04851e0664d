#include "dib/encoder.hpp"

#include <cmath>
#include <cstdio>

namespace dib {

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::BinaryTable: return "binary-table";
    case EncoderKind::ScalarMlp: return "scalar-mlp";
    case EncoderKind::SharedMlp: return "shared-mlp";
  }
  return "?";
}

EncoderKind parse_encoder_kind(const std::string& text) {
  if (text == "binary-table") return EncoderKind::BinaryTable;
  if (text == "scalar-mlp") return EncoderKind::ScalarMlp;
  if (text == "shared-mlp") return EncoderKind::SharedMlp;
  throw ContractError("unknown encoder kind '" + text + "'");
}

EncoderSpec EncoderSpec::binary_table(std::size_t latent_dim) {
  return {EncoderKind::BinaryTable, latent_dim, {}};
}

EncoderSpec EncoderSpec::scalar_mlp(std::size_t latent_dim, std::size_t width,
                                    std::size_t hidden) {
  return {EncoderKind::ScalarMlp, latent_dim,
          make_mlp(1, hidden, width, Activation::Tanh, 2 * latent_dim)};
}

EncoderSpec EncoderSpec::shared_mlp(std::size_t latent_dim, std::size_t width,
                                    std::size_t hidden) {
  return {EncoderKind::SharedMlp, latent_dim,
          make_mlp(1, hidden, width, Activation::Tanh, 2 * latent_dim)};
}

std::string encoder_prefix(const EncoderSpec& spec, std::size_t channel) {
  if (spec.kind == EncoderKind::SharedMlp) return "enc/shared";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "enc/ch%03zu", channel);
  return buf;
}

namespace {

std::string mu_path(const std::string& prefix) { return prefix + "/mu"; }
std::string log_var_path(const std::string& prefix) { return prefix + "/log_var"; }

void check_mlp_head(const EncoderSpec& spec) {
  if (spec.arch.input_dim != 1 || spec.arch.output_dim() != 2 * spec.latent_dim)
    throw DimensionError("encoder: MLP must map 1 -> " + std::to_string(2 * spec.latent_dim) +
                         ", got " + to_string(spec.arch));
}

void check_bits(const Vector& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) != 0.0 && x(i) != 1.0)
      throw DomainError("binary encoder: input " + std::to_string(x(i)) + " is not 0 or 1");
}

void check_finite(const Vector& x) {
  if (!x.allFinite()) throw DomainError("scalar encoder: non-finite input");
}

}  // namespace

void init_encoder(ParamStore& store, const EncoderSpec& spec, std::size_t channel, Rng& rng) {
  const std::string prefix = encoder_prefix(spec, channel);
  if (spec.latent_dim == 0) throw ContractError("encoder: latent_dim must be positive");
  if (spec.kind == EncoderKind::BinaryTable) {
    Tensor mu = sample_standard_normal(rng, {1, spec.latent_dim});
    for (auto& v : mu.values()) v *= kEncoderHeadInitStd;
    store.add(mu_path(prefix), std::move(mu));
    store.add(log_var_path(prefix), Tensor({1, spec.latent_dim}));
    return;
  }
  check_mlp_head(spec);
  if (store.contains(weight_path(prefix, 0))) return;
  init_mlp(store, prefix, spec.arch, rng, kEncoderHeadInitStd);
}

CodeMatrix encode_batch(const ParamStore& store, const EncoderSpec& spec, std::size_t channel,
                        const Vector& x) {
  const std::string prefix = encoder_prefix(spec, channel);
  const auto d = static_cast<Eigen::Index>(spec.latent_dim);
  CodeMatrix out;
  if (spec.kind == EncoderKind::BinaryTable) {
    check_bits(x);
    const auto mu = store.param(mu_path(prefix)).matrix();
    const auto lv = store.param(log_var_path(prefix)).matrix();
    const Vector sign = 2.0 * x.array() - 1.0;
    out.mu = sign * mu.row(0);
    out.log_var = lv.row(0).replicate(x.size(), 1);
  } else {
    check_finite(x);
    check_mlp_head(spec);
    Matrix head = mlp_apply(store, x, spec.arch, prefix);
    out.mu = head.leftCols(d);
    out.log_var = head.rightCols(d);
  }
  out.log_var = out.log_var.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  return out;
}

GaussianCode encode_binary(int x, const ParamStore& store, const EncoderSpec& spec,
                           std::size_t channel) {
  if (spec.kind != EncoderKind::BinaryTable)
    throw ContractError("encode_binary: encoder is " + to_string(spec.kind));
  Vector v(1);
  v(0) = x;
  return encode_batch(store, spec, channel, v).row(0);
}

GaussianCode encode_scalar(double x, const ParamStore& store, const EncoderSpec& spec,
                           std::size_t channel) {
  if (spec.kind == EncoderKind::BinaryTable)
    throw ContractError("encode_scalar: encoder is binary-table");
  Vector v(1);
  v(0) = x;
  return encode_batch(store, spec, channel, v).row(0);
}

GaussianCode encode(double x, const ParamStore& store, const EncoderSpec& spec,
                    std::size_t channel) {
  Vector v(1);
  v(0) = x;
  return encode_batch(store, spec, channel, v).row(0);
}

Vector sample(const GaussianCode& code, Rng& rng) {
  Vector u(code.dim());
  for (Eigen::Index d = 0; d < code.dim(); ++d)
    u(d) = code.mu(d) + std::exp(0.5 * code.log_var(d)) * rng.normal();
  return u;
}

CodeVars encode_on_tape(ParamStore& store, Tape& tape, const EncoderSpec& spec,
                        std::size_t channel, const Vector& x) {
  const std::string prefix = encoder_prefix(spec, channel);
  const auto d = static_cast<Eigen::Index>(spec.latent_dim);
  CodeVars code;
  if (spec.kind == EncoderKind::BinaryTable) {
    check_bits(x);
    Var sign = tape.constant((2.0 * x.array() - 1.0).matrix());
    Var ones = tape.constant(Matrix::Ones(x.size(), 1));
    code.mu = matmul(sign, tape.param(store, mu_path(prefix)));
    code.log_var = matmul(ones, tape.param(store, log_var_path(prefix)));
  } else {
    check_finite(x);
    check_mlp_head(spec);
    Var head = mlp_forward(store, tape.constant(x), spec.arch, prefix);
    code.mu = slice_cols(head, 0, d);
    code.log_var = slice_cols(head, d, d);
  }
  code.log_var = clamp(code.log_var, kLogVarMin, kLogVarMax);
  return code;
}

Var sample_on_tape(const CodeVars& code, const Matrix& eps) {
  Tape& tape = *code.mu.tape();
  return code.mu + exp(scale(code.log_var, 0.5)) * tape.constant(eps);
}

Var kl_on_tape(const CodeVars& code) {
  Var terms = square(code.mu) + exp(code.log_var) - code.log_var;
  return scale(add_scalar(row_sum(terms), -static_cast<double>(code.mu.cols())), 0.5);
}

}  // namespace dib
