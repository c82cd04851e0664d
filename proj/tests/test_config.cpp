#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dib/kv_config.hpp"
#include "dib/run_io.hpp"

using namespace dib;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("dib_test_" + name);
  fs::remove_all(p);
  return p;
}
}  // namespace

TEST_CASE("flat config parsing") {
  std::stringstream ss(
      "# comment\n[section]\nbatch_size = 64\nname = \"a # not comment\"  # trailing\n"
      "lr=1e-3\nflag = true\n");
  KvConfig kv = KvConfig::parse(ss);
  CHECK(kv.get_size("batch_size") == 64);
  CHECK(kv.get("name") == "a # not comment");
  CHECK(kv.get_double("lr") == 1e-3);
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get_double("missing", 2.5) == 2.5);
  CHECK_THROWS_AS(kv.get("missing"), ConfigError);
  CHECK_THROWS_AS(kv.get_size("lr"), ConfigError);
  CHECK_THROWS_AS(kv.get_double("name"), ConfigError);
  std::stringstream bad("just words\n");
  CHECK_THROWS_AS(KvConfig::parse(bad), ConfigError);
}

TEST_CASE("config writes and parses back") {
  KvConfig kv;
  kv.set("a", "1.5");
  kv.set("b", "hello world");
  std::stringstream ss;
  kv.write(ss);
  CHECK(ss.str() == "a = 1.5\nb = \"hello world\"\n");
  KvConfig back = KvConfig::parse(ss);
  CHECK(back.values() == kv.values());
}

TEST_CASE("train config round trips through key = value") {
  TrainConfig c = circuit_defaults(10);
  c.seed = 9;
  c.train_steps = 1234;
  c.learning_rate = 3.5e-4;
  TrainConfig back = train_config_from_kv(to_kv(c));
  CHECK(back.encoders.size() == 10);
  CHECK(back.encoders[3].kind == EncoderKind::BinaryTable);
  CHECK(back.decoder == c.decoder);
  CHECK(back.seed == 9);
  CHECK(back.total_steps() == 1234);
  CHECK(back.learning_rate == 3.5e-4);
  CHECK(back.schedule.beta_end == 5.0);

  TrainConfig mixed = glass_defaults(2, 100);
  mixed.encoders[1] = EncoderSpec::scalar_mlp(4, 8, 1);
  mixed.decoder = make_mlp(36, 1, 4, Activation::Tanh, 1);
  KvConfig kv = to_kv(mixed);
  CHECK(kv.has("encoder.1"));
  TrainConfig mb = train_config_from_kv(kv);
  CHECK(mb.encoders[1].latent_dim == 4);
  CHECK(mb.encoders[1].arch == mixed.encoders[1].arch);
  CHECK(mb.encoders[0].arch == mixed.encoders[0].arch);
}

TEST_CASE("encoder spec strings") {
  CHECK(to_string(EncoderSpec::binary_table(8)) == "binary-table|8");
  EncoderSpec s = parse_encoder_spec(to_string(EncoderSpec::scalar_mlp(32, 128, 2)));
  CHECK(s.latent_dim == 32);
  CHECK(s.arch.layers.size() == 3);
  CHECK_THROWS_AS(parse_encoder_spec("binary-table"), ConfigError);
  CHECK_THROWS_AS(parse_encoder_spec("scalar-mlp|4|in=1;3:identity"), ConfigError);
}

TEST_CASE("run directory refuses non-empty output without force") {
  fs::path p = temp_dir("rundir");
  RunDir run(p);
  run.prepare(false);
  CHECK(fs::is_directory(run.ckpt_dir()));
  { std::ofstream(run.file("plane.csv")) << "x\n"; }
  { std::ofstream(run.ckpt_path(20)) << "x"; }
  { std::ofstream(run.ckpt_path(100)) << "x"; }
  { std::ofstream(run.ckpt_dir() / "notes.txt") << "x"; }
  CHECK(run.checkpoint_steps_present() == std::vector<std::size_t>{20, 100});
  CHECK_THROWS_AS(run.prepare(false), RunDirError);
  run.prepare(true);
  CHECK(!fs::exists(run.file("plane.csv")));
  CHECK(run.checkpoint_steps_present().empty());
  fs::remove_all(p);
}

TEST_CASE("log csv rows") {
  std::stringstream ss;
  write_log_header(ss, 2);
  write_log_row(ss, {5, 0.25, {0.1, 0.2}, 0.5, 0.75});
  CHECK(ss.str() == "step,beta,kl_ch0_nats,kl_ch1_nats,ce_nats,accuracy\n5,0.25,0.1,0.2,0.5,0.75\n");
}
