#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "dib/adam.hpp"
#include "dib/encoder.hpp"
#include "dib/mlp.hpp"
#include "dib/rng.hpp"
#include "dib/tape.hpp"

namespace dib {

/// beta(t) = start * (end / start)^(min(t, steps) / steps).
struct BetaSchedule {
  double beta_start = 5e-4;
  double beta_end = 5.0;
  std::size_t steps = 50000;

  double at(std::size_t t) const;
  void validate() const;
};

struct TrainConfig {
  std::size_t batch_size = 512;
  /// Input is the concatenation of all channel latents; output is one logit.
  MlpArch decoder;
  std::vector<EncoderSpec> encoders;
  BetaSchedule schedule;
  /// Optimizer updates; defaults to schedule.steps when zero.
  std::size_t train_steps = 0;
  std::uint64_t seed = 0;
  /// Checkpoints evenly spaced in steps (log-spaced in beta).
  std::size_t checkpoints = 100;
  std::size_t log_every = 0;  ///< 0: steps / 200
  double learning_rate = 1e-3;
  /// Latent samples per point for evaluation-time cross-entropy.
  std::size_t eval_samples = 8;

  std::size_t channels() const { return encoders.size(); }
  std::size_t total_steps() const { return train_steps ? train_steps : schedule.steps; }
  std::size_t latent_width() const;
  void validate() const;
};

/// Boolean-circuit defaults: binary-table encoders (D=8), 3 x 256 leaky-ReLU
/// (alpha 0.3) decoder, beta 5e-4 -> 5 over 5e4 steps, batch 512, lr 1e-3.
TrainConfig circuit_defaults(std::size_t n_inputs);
/// Radial-density defaults: per-feature 2 x 128 tanh encoders (D=32), 3 x 256
/// tanh decoder, beta 1e-6 -> 1, batch 256, lr 1e-4. `steps` covers 250 epochs.
TrainConfig glass_defaults(std::size_t n_features, std::size_t steps);

/// Rows are samples, columns are channels; labels are 0/1.
struct LabeledData {
  Matrix x;
  Vector y;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t channels() const { return static_cast<std::size_t>(x.cols()); }
  LabeledData rows(const std::vector<std::size_t>& idx) const;
};

/// Empirical H(Y) in bits from label frequencies.
double label_entropy_bits(const Vector& y);

std::string decoder_prefix();

struct DibModel {
  ParamStore params;
  std::vector<EncoderSpec> encoders;
  MlpArch decoder;
};

DibModel init_model(const TrainConfig& config, Rng& rng);

struct LossParts {
  Var loss;
  std::vector<double> kl_nats;  ///< batch-mean KL per channel
  double ce_nats = 0.0;         ///< batch-mean cross-entropy
  double accuracy = 0.0;
};

/// beta * sum_i mean KL_i + mean CE of the decoder on one reparameterized
/// latent sample per row. `eps` supplies the noise per channel when given
/// (batch x latent_dim each); otherwise it is drawn from `rng`.
LossParts dib_loss(DibModel& model, Tape& tape, const Matrix& x, const Vector& y, double beta,
                   Rng& rng, const std::vector<Matrix>* eps = nullptr);

struct EvalResult {
  double predictive_bits = 0.0;
  double ce_nats = 0.0;
  double accuracy_sampled = 0.0;
  double accuracy_mean = 0.0;
};

/// H(Y) - CE in bits (clamped at 0), CE averaged over the dataset with
/// `samples` latent draws per point. `h_y_bits` is the training-split entropy.
EvalResult evaluate(const DibModel& model, const LabeledData& data, double h_y_bits, Rng& rng,
                    std::size_t samples = 8);
double predictive_info_estimate(const DibModel& model, const LabeledData& data, double h_y_bits,
                                Rng& rng, std::size_t samples = 8);

/// Batch-mean analytic KL per channel (nats) over a whole dataset.
std::vector<double> channel_kl_nats(const DibModel& model, const Matrix& x);

struct TrainLogRecord {
  std::size_t step = 0;
  double beta = 0.0;
  std::vector<double> kl_nats;
  double ce_nats = 0.0;
  double accuracy = 0.0;
};

struct Checkpoint {
  std::size_t step = 0;
  double beta = 0.0;
  ParamStore params;
  TrainLogRecord record;
};

struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& what, std::size_t step)
      : std::runtime_error(what), last_good_step(step) {}
  std::size_t last_good_step;
};

struct SweepCallbacks {
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::function<void(const TrainLogRecord&)> on_log;
};

/// Steps (1-based) at which checkpoints are taken.
std::vector<std::size_t> checkpoint_steps(std::size_t total_steps, std::size_t count);

/// Runs the annealed schedule on `train`. On a non-finite loss or gradient the
/// parameters from before the failing step are emitted as a checkpoint and
/// TrainingDiverged is thrown.
DibModel train_sweep(const TrainConfig& config, const LabeledData& train,
                     const SweepCallbacks& callbacks);

}  // namespace dib
