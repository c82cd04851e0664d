#include "dib/run_io.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <cctype>

namespace dib {

namespace fs = std::filesystem;

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string to_string(const EncoderSpec& spec) {
  std::string s = to_string(spec.kind) + "|" + std::to_string(spec.latent_dim);
  if (spec.kind != EncoderKind::BinaryTable) s += "|" + to_string(spec.arch);
  return s;
}

EncoderSpec parse_encoder_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, '|');) parts.push_back(p);
  if (parts.size() < 2) throw ConfigError("encoder spec needs kind|latent_dim: " + text);
  EncoderSpec spec;
  spec.kind = parse_encoder_kind(parts[0]);
  try {
    spec.latent_dim = std::stoul(parts[1]);
  } catch (const std::exception&) {
    throw ConfigError("bad encoder latent_dim: " + parts[1]);
  }
  if (spec.kind == EncoderKind::BinaryTable) {
    if (parts.size() != 2) throw ConfigError("binary-table encoder takes no architecture");
  } else {
    if (parts.size() != 3) throw ConfigError("mlp encoder needs an architecture: " + text);
    spec.arch = parse_arch(parts[2]);
    if (spec.arch.input_dim != 1 || spec.arch.output_dim() != 2 * spec.latent_dim)
      throw ConfigError("encoder architecture must map 1 -> 2 * latent_dim: " + text);
  }
  return spec;
}

KvConfig to_kv(const TrainConfig& c) {
  KvConfig kv;
  kv.set("batch_size", std::to_string(c.batch_size));
  kv.set("decoder", to_string(c.decoder));
  kv.set("channels", std::to_string(c.channels()));
  bool uniform = std::all_of(c.encoders.begin(), c.encoders.end(), [&](const EncoderSpec& e) {
    return e.kind == c.encoders.front().kind && e.latent_dim == c.encoders.front().latent_dim &&
           e.arch == c.encoders.front().arch;
  });
  if (uniform && !c.encoders.empty()) {
    kv.set("encoder", to_string(c.encoders.front()));
  } else {
    for (std::size_t i = 0; i < c.encoders.size(); ++i)
      kv.set("encoder." + std::to_string(i), to_string(c.encoders[i]));
  }
  kv.set("beta_start", fmt_num(c.schedule.beta_start));
  kv.set("beta_end", fmt_num(c.schedule.beta_end));
  kv.set("schedule_steps", std::to_string(c.schedule.steps));
  kv.set("train_steps", std::to_string(c.total_steps()));
  kv.set("seed", std::to_string(c.seed));
  kv.set("checkpoints", std::to_string(c.checkpoints));
  kv.set("log_every", std::to_string(c.log_every));
  kv.set("learning_rate", fmt_num(c.learning_rate));
  kv.set("eval_samples", std::to_string(c.eval_samples));
  return kv;
}

TrainConfig train_config_from_kv(const KvConfig& kv, TrainConfig c) {
  c.batch_size = kv.get_size("batch_size", c.batch_size);
  if (kv.has("decoder")) c.decoder = parse_arch(kv.get("decoder"));
  std::size_t channels = kv.get_size("channels", c.channels());
  if (kv.has("encoder")) {
    c.encoders.assign(channels, parse_encoder_spec(kv.get("encoder")));
  } else if (kv.has("encoder.0")) {
    c.encoders.clear();
    for (std::size_t i = 0; i < channels; ++i)
      c.encoders.push_back(parse_encoder_spec(kv.get("encoder." + std::to_string(i))));
  } else if (channels != c.channels()) {
    throw ConfigError("channel count changed without an encoder spec");
  }
  c.schedule.beta_start = kv.get_double("beta_start", c.schedule.beta_start);
  c.schedule.beta_end = kv.get_double("beta_end", c.schedule.beta_end);
  c.schedule.steps = kv.get_size("schedule_steps", c.schedule.steps);
  c.train_steps = kv.get_size("train_steps", c.train_steps);
  c.seed = kv.get_u64("seed", c.seed);
  c.checkpoints = kv.get_size("checkpoints", c.checkpoints);
  c.log_every = kv.get_size("log_every", c.log_every);
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.eval_samples = kv.get_size("eval_samples", c.eval_samples);
  return c;
}

void RunDir::prepare(bool force) const {
  std::error_code ec;
  if (fs::exists(root_)) {
    if (!fs::is_directory(root_)) throw RunDirError(root_.string() + " is not a directory");
    if (!fs::is_empty(root_)) {
      if (!force)
        throw RunDirError("output directory " + root_.string() +
                          " is not empty (use --force to overwrite)");
      for (const auto& entry : fs::directory_iterator(root_)) fs::remove_all(entry.path());
    }
  }
  fs::create_directories(ckpt_dir(), ec);
  if (ec) throw RunDirError("cannot create " + ckpt_dir().string() + ": " + ec.message());
}

fs::path RunDir::ckpt_path(std::size_t step) const {
  return ckpt_dir() / (std::to_string(step) + ".dibckpt");
}

void RunDir::write_config(const KvConfig& kv) const {
  auto os = open_output(file("config.toml"));
  kv.write(os);
}

KvConfig RunDir::read_config() const { return KvConfig::load(file("config.toml")); }

std::vector<std::size_t> RunDir::checkpoint_steps_present() const {
  std::vector<std::size_t> out;
  if (!fs::is_directory(ckpt_dir())) return out;
  for (const auto& entry : fs::directory_iterator(ckpt_dir())) {
    if (entry.path().extension() != ".dibckpt") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
    out.push_back(std::stoul(stem));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_log_header(std::ostream& os, std::size_t channels) {
  os << "step,beta";
  for (std::size_t j = 0; j < channels; ++j) os << ",kl_ch" << j << "_nats";
  os << ",ce_nats,accuracy\n";
}

void write_log_row(std::ostream& os, const TrainLogRecord& rec) {
  os << rec.step << ',' << fmt_num(rec.beta);
  for (double k : rec.kl_nats) os << ',' << fmt_num(k);
  os << ',' << fmt_num(rec.ce_nats) << ',' << fmt_num(rec.accuracy) << '\n';
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RunDirError("cannot write " + path.string());
  return os;
}

}  // namespace dib
