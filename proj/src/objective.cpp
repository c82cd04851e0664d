#include "dib/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dib/gaussian.hpp"

namespace dib {

double BetaSchedule::at(std::size_t t) const {
  if (t >= steps) return beta_end;
  if (t == 0) return beta_start;
  double frac = static_cast<double>(t) / static_cast<double>(steps);
  return beta_start * std::pow(beta_end / beta_start, frac);
}

void BetaSchedule::validate() const {
  if (!(beta_start > 0.0) || !(beta_end > 0.0) || !std::isfinite(beta_start) ||
      !std::isfinite(beta_end))
    throw ContractError("beta schedule endpoints must be positive and finite");
  if (steps == 0) throw ContractError("beta schedule needs at least one step");
}

std::size_t TrainConfig::latent_width() const {
  std::size_t w = 0;
  for (const auto& e : encoders) w += e.latent_dim;
  return w;
}

void TrainConfig::validate() const {
  schedule.validate();
  if (encoders.empty()) throw ContractError("at least one channel is required");
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be positive");
  if (eval_samples == 0) throw ContractError("eval_samples must be positive");
  if (decoder.input_dim != latent_width())
    throw DimensionError("decoder input " + std::to_string(decoder.input_dim) +
                         " does not match total latent width " + std::to_string(latent_width()));
  if (decoder.output_dim() != 1) throw DimensionError("decoder must output a single logit");
}

TrainConfig circuit_defaults(std::size_t n_inputs) {
  TrainConfig c;
  c.batch_size = 512;
  c.encoders.assign(n_inputs, EncoderSpec::binary_table(8));
  c.decoder = make_mlp(c.latent_width(), 3, 256, Activation::LeakyRelu, 1, 0.3);
  c.schedule = {5e-4, 5.0, 50000};
  c.learning_rate = 1e-3;
  return c;
}

TrainConfig glass_defaults(std::size_t n_features, std::size_t steps) {
  TrainConfig c;
  c.batch_size = 256;
  c.encoders.assign(n_features, EncoderSpec::scalar_mlp(32, 128, 2));
  c.decoder = make_mlp(c.latent_width(), 3, 256, Activation::Tanh, 1);
  c.schedule = {1e-6, 1.0, steps};
  c.learning_rate = 1e-4;
  return c;
}

LabeledData LabeledData::rows(const std::vector<std::size_t>& idx) const {
  LabeledData out;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto r = static_cast<Eigen::Index>(idx[i]);
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(r);
    out.y(static_cast<Eigen::Index>(i)) = y(r);
  }
  return out;
}

double label_entropy_bits(const Vector& y) {
  if (y.size() == 0) return 0.0;
  double p = y.mean();
  auto h = [](double q) { return q > 0.0 ? -q * std::log2(q) : 0.0; };
  return h(p) + h(1.0 - p);
}

std::string decoder_prefix() { return "dec"; }

DibModel init_model(const TrainConfig& config, Rng& rng) {
  config.validate();
  DibModel m;
  m.encoders = config.encoders;
  m.decoder = config.decoder;
  for (std::size_t i = 0; i < m.encoders.size(); ++i) init_encoder(m.params, m.encoders[i], i, rng);
  init_mlp(m.params, decoder_prefix(), m.decoder, rng);
  return m;
}

namespace {

void check_inputs(const DibModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.encoders.size())
    throw DimensionError("input has " + std::to_string(x.cols()) + " channels, model has " +
                         std::to_string(model.encoders.size()));
}

double accuracy_of(const Matrix& logits, const Vector& y) {
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    hit += ((logits(i, 0) > 0.0) == (y(i) > 0.5)) ? 1 : 0;
  return logits.rows() ? static_cast<double>(hit) / static_cast<double>(logits.rows()) : 0.0;
}

double mean_bce(const Matrix& logits, const Vector& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double z = logits(i, 0);
    double sp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    s += sp - y(i) * z;
  }
  return logits.rows() ? s / static_cast<double>(logits.rows()) : 0.0;
}

}  // namespace

LossParts dib_loss(DibModel& model, Tape& tape, const Matrix& x, const Vector& y, double beta,
                   Rng& rng, const std::vector<Matrix>* eps) {
  if (!(beta >= 0.0)) throw DomainError("beta must be non-negative");
  check_inputs(model, x);
  if (y.size() != x.rows()) throw DimensionError("label count does not match batch size");
  if (eps && eps->size() != model.encoders.size())
    throw DimensionError("noise must be supplied for every channel");
  LossParts out;
  std::vector<Var> latents;
  Var kl_total;
  const auto n = x.rows();
  for (std::size_t i = 0; i < model.encoders.size(); ++i) {
    const auto& spec = model.encoders[i];
    CodeVars code =
        encode_on_tape(model.params, tape, spec, i, x.col(static_cast<Eigen::Index>(i)));
    Matrix e = eps ? (*eps)[i]
                   : standard_normal_matrix(rng, n, static_cast<Eigen::Index>(spec.latent_dim));
    latents.push_back(sample_on_tape(code, e));
    Var kl = mean(kl_on_tape(code));
    out.kl_nats.push_back(kl.scalar());
    kl_total = kl_total.valid() ? kl_total + kl : kl;
  }
  Var z = latents.size() == 1 ? latents[0] : concat_cols(latents);
  Var logits = mlp_forward(model.params, z, model.decoder, decoder_prefix());
  Var ce = mean(bce_with_logits(logits, y));
  out.ce_nats = ce.scalar();
  out.accuracy = accuracy_of(logits.value(), y);
  out.loss = scale(kl_total, beta) + ce;
  return out;
}

EvalResult evaluate(const DibModel& model, const LabeledData& data, double h_y_bits, Rng& rng,
                    std::size_t samples) {
  check_inputs(model, data.x);
  if (samples == 0) throw ContractError("evaluation needs at least one sample");
  if (data.size() == 0) throw ContractError("evaluation dataset is empty");
  std::vector<CodeMatrix> codes;
  for (std::size_t i = 0; i < model.encoders.size(); ++i)
    codes.push_back(encode_batch(model.params, model.encoders[i], i,
                                 data.x.col(static_cast<Eigen::Index>(i))));
  const auto n = data.x.rows();
  const auto width = static_cast<Eigen::Index>(
      std::accumulate(model.encoders.begin(), model.encoders.end(), std::size_t{0},
                      [](std::size_t a, const EncoderSpec& e) { return a + e.latent_dim; }));
  Matrix z(n, width);
  auto fill = [&](bool noisy) {
    Eigen::Index c = 0;
    for (std::size_t i = 0; i < codes.size(); ++i) {
      const auto d = codes[i].mu.cols();
      if (noisy) {
        Matrix e = standard_normal_matrix(rng, n, d);
        z.middleCols(c, d) = codes[i].mu.array() + (0.5 * codes[i].log_var.array()).exp() * e.array();
      } else {
        z.middleCols(c, d) = codes[i].mu;
      }
      c += d;
    }
  };
  EvalResult r;
  for (std::size_t s = 0; s < samples; ++s) {
    fill(true);
    Matrix logits = mlp_apply(model.params, z, model.decoder, decoder_prefix());
    r.ce_nats += mean_bce(logits, data.y);
    r.accuracy_sampled += accuracy_of(logits, data.y);
  }
  r.ce_nats /= static_cast<double>(samples);
  r.accuracy_sampled /= static_cast<double>(samples);
  fill(false);
  r.accuracy_mean = accuracy_of(mlp_apply(model.params, z, model.decoder, decoder_prefix()), data.y);
  r.predictive_bits = std::max(0.0, h_y_bits - nats_to_bits(r.ce_nats));
  return r;
}

double predictive_info_estimate(const DibModel& model, const LabeledData& data, double h_y_bits,
                                Rng& rng, std::size_t samples) {
  return evaluate(model, data, h_y_bits, rng, samples).predictive_bits;
}

std::vector<double> channel_kl_nats(const DibModel& model, const Matrix& x) {
  check_inputs(model, x);
  std::vector<double> out;
  for (std::size_t i = 0; i < model.encoders.size(); ++i) {
    CodeMatrix c = encode_batch(model.params, model.encoders[i], i, x.col(static_cast<Eigen::Index>(i)));
    double s = 0.0;
    for (Eigen::Index r = 0; r < c.mu.rows(); ++r) s += kl_to_prior(c.row(r));
    out.push_back(c.mu.rows() ? s / static_cast<double>(c.mu.rows()) : 0.0);
  }
  return out;
}

std::vector<std::size_t> checkpoint_steps(std::size_t total_steps, std::size_t count) {
  std::vector<std::size_t> out;
  if (total_steps == 0 || count == 0) return out;
  count = std::min(count, total_steps);
  for (std::size_t k = 1; k <= count; ++k) {
    auto s = static_cast<std::size_t>(std::llround(static_cast<double>(k) *
                                                   static_cast<double>(total_steps) /
                                                   static_cast<double>(count)));
    if (out.empty() || s > out.back()) out.push_back(s);
  }
  return out;
}

DibModel train_sweep(const TrainConfig& config, const LabeledData& train,
                     const SweepCallbacks& callbacks) {
  config.validate();
  if (train.size() == 0) throw ContractError("training set is empty");
  if (train.channels() != config.channels())
    throw DimensionError("training data has " + std::to_string(train.channels()) +
                         " channels, config has " + std::to_string(config.channels()));
  Rng root(config.seed);
  Rng init_rng = root.split(0);
  Rng batch_rng = root.split(1);
  Rng noise_rng = root.split(2);
  DibModel model = init_model(config, init_rng);
  AdamState adam(config.learning_rate);

  const std::size_t total = config.total_steps();
  const std::size_t bs = std::min(config.batch_size, train.size());
  const std::size_t log_every = config.log_every ? config.log_every : std::max<std::size_t>(1, total / 200);
  const auto ckpts = checkpoint_steps(total, config.checkpoints);
  std::size_t next_ckpt = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> idx(bs);
  TrainLogRecord last;

  for (std::size_t step = 1; step <= total; ++step) {
    const double beta = config.schedule.at(step);
    if (bs == train.size()) {
      idx = order;
    } else {
      for (std::size_t j = 0; j < bs; ++j) {
        auto k = j + static_cast<std::size_t>(batch_rng.uniform_int(order.size() - j));
        std::swap(order[j], order[k]);
        idx[j] = order[j];
      }
    }
    LabeledData batch = train.rows(idx);

    auto diverge = [&](const std::string& why) {
      if (callbacks.on_checkpoint) {
        Checkpoint c{step - 1, config.schedule.at(step - 1), model.params, last};
        callbacks.on_checkpoint(c);
      }
      throw TrainingDiverged("training diverged at step " + std::to_string(step) + ": " + why,
                             step - 1);
    };

    Tape tape;
    model.params.zero_grad();
    LossParts parts = dib_loss(model, tape, batch.x, batch.y, beta, noise_rng);
    if (!std::isfinite(parts.loss.scalar())) diverge("non-finite loss");
    tape.backward(parts.loss);
    try {
      adam_step(model.params, adam);
    } catch (const NonFiniteGradient& e) {
      diverge(e.what());
    }

    last = {step, beta, parts.kl_nats, parts.ce_nats, parts.accuracy};
    if (callbacks.on_log && (step % log_every == 0 || step == total)) callbacks.on_log(last);
    if (next_ckpt < ckpts.size() && ckpts[next_ckpt] == step) {
      ++next_ckpt;
      if (callbacks.on_checkpoint) callbacks.on_checkpoint({step, beta, model.params, last});
    }
  }
  return model;
}

}  // namespace dib
