// dib: distributed information bottleneck experiments.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dib/analysis.hpp"
#include "dib/checkpoint.hpp"
#include "dib/circuit.hpp"
#include "dib/glassfeat.hpp"
#include "dib/kv_config.hpp"
#include "dib/miest.hpp"
#include "dib/objective.hpp"
#include "dib/run_io.hpp"

namespace fs = std::filesystem;
using namespace dib;

namespace {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_file;
  std::string spec;
  std::string data;
  std::string split;
  std::string out;
  std::string measure_only;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<double> beta_start;
  std::optional<double> beta_end;
  std::optional<std::size_t> K;
  std::optional<std::size_t> B;
  std::optional<std::size_t> checkpoints;
  std::optional<double> lr;
  std::size_t synth_n = 2000;
  double difficulty = 1.0;
  double disting_bits = 1.0;
  std::size_t disting_top = 3;
  std::string similarity = "bhattacharyya";
  bool serial = false;
  bool force = false;
  bool quick = false;
};

fs::path resolve_spec(const std::string& name) {
  fs::path p(name);
  if (fs::exists(p)) return p;
  fs::path bundled = fs::path(DIB_DATA_DIR) / "circuits" / p.filename();
  if (fs::exists(bundled)) return bundled;
  throw ValidationError("circuit spec not found: " + name);
}

void apply_overrides(TrainConfig& c, const Options& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.steps) {
    c.schedule.steps = *o.steps;
    c.train_steps = *o.steps;
  }
  if (o.beta_start) c.schedule.beta_start = *o.beta_start;
  if (o.beta_end) c.schedule.beta_end = *o.beta_end;
  if (o.checkpoints) c.checkpoints = *o.checkpoints;
  if (o.lr) c.learning_rate = *o.lr;
}

MeasureConfig measure_config(const KvConfig& kv, const Options& o, std::uint64_t seed) {
  MeasureConfig m;
  m.K = o.K.value_or(kv.get_size("measure_K", m.K));
  m.B = o.B.value_or(kv.get_size("measure_B", m.B));
  m.seed = seed;
  if (m.K < 2) throw ValidationError("--K must be at least 2");
  if (m.B < 1) throw ValidationError("--B must be positive");
  return m;
}

void print_config(const std::string& kind, const KvConfig& kv) {
  std::cout << "# dib " << kind << " configuration\n";
  kv.write(std::cout);
  std::cout.flush();
}

/// Trains and writes log.csv and ckpt/ into `run`.
void run_training(const RunDir& run, const TrainConfig& config, const LabeledData& train) {
  auto log = open_output(run.file("log.csv"));
  write_log_header(log, config.channels());
  const std::size_t total = config.total_steps();
  SweepCallbacks cb;
  cb.on_log = [&](const TrainLogRecord& r) { write_log_row(log, r); };
  cb.on_checkpoint = [&](const Checkpoint& ck) {
    save_checkpoint(run.ckpt_path(ck.step), ck.params);
    double kl = 0.0;
    for (double k : ck.record.kl_nats) kl += k;
    std::fprintf(stderr, "\rstep %zu/%zu  beta %.3g  kl %.3f bits  ce %.4f nats   ", ck.step,
                 total, ck.beta, nats_to_bits(kl), ck.record.ce_nats);
  };
  try {
    train_sweep(config, train, cb);
  } catch (const TrainingDiverged& e) {
    std::fprintf(stderr, "\n");
    throw;
  }
  std::fprintf(stderr, "\n");
}

/// Measures every expected checkpoint of `run`; parallel over checkpoints
/// unless `serial`. Results do not depend on the thread count.
std::vector<InfoPlanePoint> measure_run(const RunDir& run, const TrainConfig& config,
                                        const Matrix& mi_data, const LabeledData& eval,
                                        double h_y_bits, const MeasureConfig& mc, bool serial) {
  const auto expected = checkpoint_steps(config.total_steps(), config.checkpoints);
  const auto present = run.checkpoint_steps_present();
  require_checkpoints(expected, present);
  std::vector<InfoPlanePoint> points(expected.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (std::size_t i = next++; i < expected.size(); i = next++) {
      try {
        const std::size_t step = expected[i];
        DibModel model{load_checkpoint(run.ckpt_path(step)), config.encoders, config.decoder};
        MeasureConfig local = mc;
        local.seed = Rng(mc.seed).split(step).next_u64();
        points[i] = measure_point(model, mi_data, eval, h_y_bits, local, step,
                                  config.schedule.at(step));
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  unsigned n_threads = serial ? 1u : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(expected.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return assemble_plane(std::move(points));
}

void print_plane_summary(const std::vector<InfoPlanePoint>& plane, double h_y_bits) {
  if (plane.empty()) return;
  const auto& lo = plane.front();
  const auto& hi = plane.back();
  std::printf("H(Y) = %.4f bits\n", h_y_bits);
  std::printf("most compressed: beta %.3g  total %.3f bits  predictive %.3f bits  acc %.3f\n",
              lo.beta, lo.total_bits, lo.predictive_bits, lo.accuracy);
  std::printf("least compressed: beta %.3g  total %.3f bits  predictive %.3f bits  acc %.3f\n",
              hi.beta, hi.total_bits, hi.predictive_bits, hi.accuracy);
  const auto& one = nearest_point(plane, 1.0);
  auto top = top_k_channels(one, 5);
  std::printf("channels >= 0.1 bits near 1 total bit:");
  for (auto c : top) std::printf(" ch%zu (%.3f)", c, one.per_channel_bits[c]);
  std::printf("\n");
}

// ---- circuit ----------------------------------------------------------------

int measure_circuit(const RunDir& run, const Options& o) {
  KvConfig kv = run.read_config();
  CircuitSpec spec = load_circuit(run.file("circuit.circ"));
  TrainConfig config = train_config_from_kv(kv, circuit_defaults(spec.n_inputs));
  TruthTable tt = truth_table(spec);
  LabeledData data{tt.input_matrix(), tt.output_matrix().col(0)};
  const double h_y = label_entropy_bits(data.y);
  MeasureConfig mc = measure_config(kv, o, config.seed);
  auto plane = measure_run(run, config, data.x, data, h_y, mc, o.serial);

  auto plane_os = open_output(run.file("plane.csv"));
  write_plane_csv(plane_os, plane);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < spec.n_inputs; ++i) labels.push_back("x" + std::to_string(i + 1));
  auto alloc_os = open_output(run.file("alloc.csv"));
  write_alloc_csv(alloc_os, plane, labels);
  auto scatter = subset_scatter(tt);
  auto subsets_os = open_output(run.file("subsets.csv"));
  write_subsets_csv(subsets_os, scatter);
  print_plane_summary(plane, h_y);
  return 0;
}

int cmd_circuit(const Options& o) {
  if (!o.measure_only.empty()) return measure_circuit(RunDir(o.measure_only), o);
  if (o.out.empty()) throw ValidationError("--out is required");
  CircuitSpec spec = o.spec.empty() ? default_circuit() : load_circuit(resolve_spec(o.spec));
  TrainConfig config = circuit_defaults(spec.n_inputs);
  KvConfig file_kv = o.config_file.empty() ? KvConfig{} : KvConfig::load(o.config_file);
  config = train_config_from_kv(file_kv, config);
  if (o.quick) {
    config.schedule.steps = 2000;
    config.train_steps = 2000;
    config.checkpoints = 40;
  }
  apply_overrides(config, o);
  config.validate();
  MeasureConfig mc = measure_config(file_kv, o, config.seed);

  KvConfig kv = to_kv(config);
  kv.set("experiment", "circuit");
  kv.set("measure_K", std::to_string(mc.K));
  kv.set("measure_B", std::to_string(mc.B));
  print_config("circuit", kv);

  RunDir run(o.out);
  run.prepare(o.force);
  run.write_config(kv);
  {
    auto os = open_output(run.file("circuit.circ"));
    os << serialize_circuit(spec);
  }
  TruthTable tt = truth_table(spec);
  LabeledData data{tt.input_matrix(), tt.output_matrix().col(0)};
  run_training(run, config, data);
  Options again = o;
  again.measure_only = o.out;
  return measure_circuit(run, again);
}

// ---- glass ------------------------------------------------------------------

struct GlassData {
  glass::Dataset ds;
  glass::NormStats norm;
  LabeledData train;
  LabeledData val;
};

GlassData load_glass(const KvConfig& kv) {
  GlassData g;
  const std::string source = kv.get("data");
  const std::uint64_t seed = kv.get_u64("data_seed", 0);
  if (source == "synth") {
    auto all = glass::synth_dataset(seed, kv.get_size("synth_n"), kv.get_double("difficulty"));
    g.ds = glass::split_dataset(std::move(all), seed);
  } else {
    std::optional<fs::path> split;
    if (kv.has("split")) split = kv.get("split");
    g.ds = glass::load_dataset(source, seed, split);
  }
  Matrix train_f = glass::featurize_all(g.ds.train);
  Matrix val_f = glass::featurize_all(g.ds.val);
  g.norm = glass::fit_norm_stats(train_f);
  g.train = {g.norm.apply(train_f), glass::labels_of(g.ds.train)};
  g.val = {g.norm.apply(val_f), glass::labels_of(g.ds.val)};
  return g;
}

int measure_glass(const RunDir& run, const Options& o) {
  KvConfig kv = run.read_config();
  GlassData g = load_glass(kv);
  TrainConfig config = train_config_from_kv(
      kv, glass_defaults(g.norm.kept.size(), kv.get_size("schedule_steps")));
  if (config.channels() != g.norm.kept.size())
    throw ValidationError("config channel count does not match the dataset features");
  const double h_y = label_entropy_bits(g.train.y);
  MeasureConfig mc = measure_config(kv, o, config.seed);
  auto plane = measure_run(run, config, g.train.x, g.val, h_y, mc, o.serial);

  auto plane_os = open_output(run.file("plane.csv"));
  write_plane_csv(plane_os, plane);
  std::vector<std::string> labels;
  for (auto f : g.norm.kept) labels.push_back(glass::feature_name(f));
  auto alloc_os = open_output(run.file("alloc.csv"));
  write_alloc_csv(alloc_os, plane, labels);

  const Similarity sim = parse_similarity(kv.get("similarity", o.similarity));
  const auto& point = nearest_point(plane, kv.get_double("disting_bits", o.disting_bits));
  const ParamStore params = load_checkpoint(run.ckpt_path(point.step));
  for (auto ch : top_k_channels(point, kv.get_size("disting_top", o.disting_top))) {
    std::vector<double> column(g.train.x.col(static_cast<Eigen::Index>(ch)).data(),
                               g.train.x.col(static_cast<Eigen::Index>(ch)).data() +
                                   g.train.x.rows());
    auto probes = quantile_probes(column, 64);
    auto d = distinguishability(params, config.encoders[ch], ch, probes, sim);
    auto os = open_output(run.file("disting_" + labels[ch] + ".csv"));
    write_disting_csv(os, d);
  }

  auto base = glass::linear_baseline(g.train.x, g.train.y, g.val.x, g.val.y);
  {
    auto os = open_output(run.file("baseline.csv"));
    os << "accuracy,penalty\n" << fmt_num(base.accuracy) << ',' << fmt_num(base.penalty) << '\n';
  }
  print_plane_summary(plane, h_y);
  std::printf("linear baseline validation accuracy %.4f (penalty %g)\n", base.accuracy,
              base.penalty);
  return 0;
}

int cmd_glass(const Options& o) {
  if (!o.measure_only.empty()) return measure_glass(RunDir(o.measure_only), o);
  if (o.out.empty()) throw ValidationError("--out is required");
  KvConfig file_kv = o.config_file.empty() ? KvConfig{} : KvConfig::load(o.config_file);

  KvConfig data_kv;
  std::string source = o.data.empty() ? file_kv.get("data", "synth") : o.data;
  if (source != "synth") {
    if (!fs::exists(source)) throw ValidationError("dataset not found: " + source);
    source = fs::absolute(source).string();
  }
  data_kv.set("data", source);
  data_kv.set("data_seed", std::to_string(o.seed.value_or(file_kv.get_u64("seed", 0))));
  data_kv.set("synth_n", std::to_string(file_kv.get_size("synth_n", o.synth_n)));
  data_kv.set("difficulty", fmt_num(file_kv.get_double("difficulty", o.difficulty)));
  if (!o.split.empty()) {
    if (!fs::exists(o.split)) throw ValidationError("split file not found: " + o.split);
    data_kv.set("split", fs::absolute(o.split).string());
  }
  GlassData g = load_glass(data_kv);

  const std::size_t steps_per_epoch = (g.train.size() + 255) / 256;
  TrainConfig config = glass_defaults(g.norm.kept.size(), 250 * steps_per_epoch);
  config = train_config_from_kv(file_kv, config);
  if (o.quick) {
    config.schedule.steps = 25 * steps_per_epoch;
    config.train_steps = config.schedule.steps;
    config.checkpoints = 25;
  }
  apply_overrides(config, o);
  config.validate();
  MeasureConfig mc = measure_config(file_kv, o, config.seed);

  KvConfig kv = to_kv(config);
  for (const auto& [k, v] : data_kv.values()) kv.set(k, v);
  kv.set("experiment", "glass");
  kv.set("measure_K", std::to_string(mc.K));
  kv.set("measure_B", std::to_string(mc.B));
  kv.set("similarity", o.similarity);
  kv.set("disting_bits", fmt_num(o.disting_bits));
  kv.set("disting_top", std::to_string(o.disting_top));
  print_config("glass", kv);

  RunDir run(o.out);
  run.prepare(o.force);
  run.write_config(kv);
  {
    auto os = open_output(run.file("norm.json"));
    glass::write_norm_stats(os, g.norm);
  }
  run_training(run, config, g.train);
  Options again = o;
  again.measure_only = o.out;
  return measure_glass(run, again);
}

// ---- mi-bench ---------------------------------------------------------------

int cmd_mi_bench(const Options& o) {
  BenchConfig bc;
  if (o.quick) bc.batches = 32;
  if (o.B) bc.batches = *o.B;
  if (o.K) bc.batch_sizes = {*o.K};
  if (o.seed) bc.seed = *o.seed;
  if (bc.batches < 1) throw ValidationError("--B must be positive");
  if (o.K && *o.K < 2) throw ValidationError("--K must be at least 2");
  std::printf("# dib mi-bench: B=%zu dataset=%zu mc_samples=%zu D=max(32,2^H) seed=%llu\n",
              bc.batches, bc.dataset_size, bc.mc_samples, static_cast<unsigned long long>(bc.seed));
  std::fflush(stdout);
  auto rows = bench_orthogonal(bc);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!o.out.empty()) {
    fs::path out(o.out);
    if (out.extension() != ".csv") {
      fs::create_directories(out);
      out /= "bench.csv";
    } else if (out.has_parent_path()) {
      fs::create_directories(out.parent_path());
    }
    if (fs::exists(out) && !o.force)
      throw RunDirError(out.string() + " exists (use --force to overwrite)");
    file = open_output(out);
    os = &file;
  }
  write_bench_csv(*os, rows);
  std::size_t bad = 0;
  for (const auto& r : rows)
    if (!r.sandwiched()) {
      ++bad;
      std::fprintf(stderr, "sandwich violated: H=%d d=%g K=%zu lower=%.4f mc=%.4f upper=%.4f\n",
                   r.entropy_bits, r.separation, r.bounds.batch_size, r.bounds.lower_bits,
                   r.mc.bits, r.bounds.upper_bits);
    }
  std::fprintf(stderr, "sandwich check: %zu/%zu rows pass\n", rows.size() - bad, rows.size());
  return bad == 0 ? 0 : 1;
}

// ---- report -----------------------------------------------------------------

int cmd_report(const Options& o) {
  std::string dir = !o.measure_only.empty() ? o.measure_only : o.out;
  if (dir.empty()) throw ValidationError("report needs --out <run directory>");
  RunDir run(dir);
  if (!fs::exists(run.file("config.toml")))
    throw ValidationError(dir + " has no config.toml");
  const std::string kind = run.read_config().get("experiment");
  if (kind == "circuit") return measure_circuit(run, o);
  if (kind == "glass") return measure_glass(run, o);
  throw ValidationError("unknown experiment kind in config: " + kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed information bottleneck experiments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_file, "Flat key = value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output run directory");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--K", o.K, "Evaluation batch size for MI bounds");
    sub->add_option("--B", o.B, "Number of evaluation batches");
    sub->add_flag("--serial", o.serial, "Measure checkpoints on one thread");
    sub->add_flag("--force", o.force, "Overwrite a non-empty output directory");
    sub->add_flag("--quick", o.quick, "Reduced-cost profile");
  };
  auto training = [&](CLI::App* sub) {
    sub->add_option("--steps", o.steps, "Optimizer steps (beta schedule length)");
    sub->add_option("--beta-start", o.beta_start, "Initial beta");
    sub->add_option("--beta-end", o.beta_end, "Final beta");
    sub->add_option("--checkpoints", o.checkpoints, "Checkpoints per sweep");
    sub->add_option("--lr", o.lr, "Adam learning rate");
    sub->add_option("--measure-only", o.measure_only,
                    "Recompute report CSVs from an existing run directory");
  };

  auto* circuit = app.add_subcommand("circuit", "Boolean circuit sweep");
  common(circuit);
  training(circuit);
  circuit->add_option("--spec", o.spec, "Circuit spec file (default: bundled 10-input circuit)");

  auto* glass_cmd = app.add_subcommand("glass", "Radial-density glass sweep");
  common(glass_cmd);
  training(glass_cmd);
  glass_cmd->add_option("--data", o.data, "Neighborhood dataset file, or 'synth'");
  glass_cmd->add_option("--split", o.split, "Validation index file");
  glass_cmd->add_option("--synth-n", o.synth_n, "Synthetic neighborhoods");
  glass_cmd->add_option("--difficulty", o.difficulty, "Synthetic class separation");
  glass_cmd->add_option("--disting-bits", o.disting_bits,
                        "Total bits of the checkpoint used for distinguishability matrices");
  glass_cmd->add_option("--disting-top", o.disting_top, "Channels with matrices");
  glass_cmd->add_option("--similarity", o.similarity, "bhattacharyya or wasserstein")
      ->check(CLI::IsMember({"bhattacharyya", "wasserstein"}));

  auto* bench = app.add_subcommand("mi-bench", "MI bound benchmark on orthogonal schemes");
  common(bench);

  auto* report = app.add_subcommand("report", "Re-measure a run directory and print a summary");
  common(report);
  report->add_option("--measure-only", o.measure_only, "Run directory (same as --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*circuit) return cmd_circuit(o);
    if (*glass_cmd) return cmd_glass(o);
    if (*bench) return cmd_mi_bench(o);
    if (*report) return cmd_report(o);
  } catch (const CircuitParseError& e) {
    std::cerr << "error: invalid circuit spec: " << e.what() << '\n';
    return 2;
  } catch (const glass::DatasetFormatError& e) {
    std::cerr << "error: invalid dataset: " << e.what() << '\n';
    return 2;
  } catch (const MissingCheckpoints& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const RunDirError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "error: invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
