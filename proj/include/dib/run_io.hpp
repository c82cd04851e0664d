#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "dib/kv_config.hpp"
#include "dib/objective.hpp"

namespace dib {

/// "%.10g"
std::string fmt_num(double v);

/// TrainConfig fields as flat keys. Channels sharing one encoder spec are
/// written once as `encoder`; otherwise `encoder.<i>` per channel.
KvConfig to_kv(const TrainConfig& config);
/// Overlays keys present in `kv` onto `base`.
TrainConfig train_config_from_kv(const KvConfig& kv, TrainConfig base = {});

std::string to_string(const EncoderSpec& spec);
EncoderSpec parse_encoder_spec(const std::string& text);

struct RunDirError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Layout: config.toml, log.csv, ckpt/<step>.dibckpt plus report CSVs.
class RunDir {
 public:
  explicit RunDir(std::filesystem::path root) : root_(std::move(root)) {}

  /// Creates the directory. A non-empty directory is refused unless `force`,
  /// in which case its previous contents are removed.
  void prepare(bool force) const;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path file(const std::string& name) const { return root_ / name; }
  std::filesystem::path ckpt_dir() const { return root_ / "ckpt"; }
  std::filesystem::path ckpt_path(std::size_t step) const;

  void write_config(const KvConfig& kv) const;
  KvConfig read_config() const;

  /// Steps with a checkpoint file, ascending.
  std::vector<std::size_t> checkpoint_steps_present() const;

 private:
  std::filesystem::path root_;
};

/// Columns: step,beta,kl_ch<j>_nats...,ce_nats,accuracy
void write_log_header(std::ostream& os, std::size_t channels);
void write_log_row(std::ostream& os, const TrainLogRecord& rec);

/// Opens `path` for writing or throws RunDirError.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace dib
