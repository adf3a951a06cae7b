#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pds/config.hpp"
#include "pds/error.hpp"
#include "pds/eval.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

// Raised while assembling settings; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_files, "key = value config file (repeatable, later wins)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "override one key, key=value (repeatable)");
  cmd->add_option("--seed", args.seed, "seed for this subcommand (see README)");
  cmd->add_option("--out", args.out, "output directory")->required();
}

// Defaults, then files in order, then --set, then --seed.
pds::Settings build_settings(const CommonArgs& args, const std::string& seed_key) {
  pds::Settings s;
  try {
    for (const std::string& f : args.config_files) pds::load_config_file(s, f);
    for (const std::string& o : args.overrides) pds::apply_override(s, o);
    if (args.seed) pds::set_value(s, seed_key, std::to_string(*args.seed));
    s.experiment.validate();
    if (s.experiment.attack.stage1_duration < 0.0 || s.experiment.attack.growth_rate <= 0.0)
      throw pds::ConfigError("attack stage1_duration must be >= 0 and growth_rate > 0");
    if (s.simulate_deviation < 0.0) throw pds::ConfigError("simulate.deviation must be non-negative");
  } catch (const pds::ConfigError& e) {
    throw UsageError(e.what());
  }
  return s;
}

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw pds::ValidationError("cannot write " + path.string());
  return f;
}

void echo_config(const fs::path& dir, const pds::Settings& s) {
  std::ofstream f = open_out(dir / "effective_config.txt");
  pds::write_config(f, s);
}

std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<std::vector<pds::EpochData>> synthetic_calibration_set(const pds::ExperimentConfig& cfg) {
  std::vector<std::vector<pds::EpochData>> out;
  for (int k = 0; k < cfg.calibration_traces; ++k)
    out.push_back(pds::benign_epochs(cfg, cfg.calibration_seed + static_cast<std::uint64_t>(k)));
  return out;
}

// Calibrates the configured detector at pds.pfp_max and stores the fitted
// covariances and threshold back into the settings.
void calibrate_into(pds::Settings& s, std::span<const std::vector<pds::EpochData>> traces) {
  pds::ExperimentConfig cfg = s.experiment;
  cfg.pfp_max = {cfg.pds.pfp_max};
  const pds::DetectorCalibration cal = pds::calibrate_detector(cfg, s.detector, traces);
  s.experiment.pds.covariance = cal.covariance;
  s.threshold = cal.thresholds.front();
}

std::vector<pds::EpochData> load_epochs(const std::string& path, const pds::Settings& s) {
  const pds::Trace trace = pds::load_trace(path);
  std::vector<std::string> warnings;
  auto epochs = pds::align_epochs(trace, s.experiment.pds.align_tolerance, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
  return epochs;
}

int cmd_simulate(const CommonArgs& args) {
  const pds::Settings s = build_settings(args, "seed");
  const fs::path dir = prepare_out(args.out);
  pds::TraceConfig tc = s.experiment.trace;
  tc.rng_seed = s.seed;
  std::optional<pds::AttackConfig> atk;
  if (s.simulate_deviation > 0.0) atk = pds::attack_for(s.experiment, s.simulate_deviation);
  const pds::Scenario sc = pds::make_scenario(tc, s.experiment.shape, s.experiment.drift, atk);
  pds::write_trace(dir, sc.trace);
  echo_config(dir, s);
  std::cout << "wrote " << sc.trace.positions.size() << " position and " << sc.trace.motion.size()
            << " motion samples to " << dir.string() << '\n';
  return kOk;
}

int cmd_detect(const CommonArgs& args, const std::string& trace_path) {
  pds::Settings s = build_settings(args, "seed");
  const fs::path dir = prepare_out(args.out);
  const std::vector<pds::EpochData> epochs = load_epochs(trace_path, s);
  if (s.detector.is_pds()) {
    pds::DetectorConfig dc = s.experiment.pds;
    dc.mode = s.detector.mode;
    pds::check_streams(dc, epochs);
  }
  if (!s.threshold) {
    std::cerr << "calibrating " << pds::to_string(s.detector) << " on " << s.experiment.calibration_traces
              << " synthetic benign traces\n";
    calibrate_into(s, synthetic_calibration_set(s.experiment));
  }
  const auto verdicts = pds::run_detector(s.experiment, s.detector, s.experiment.pds.covariance, *s.threshold,
                                          s.experiment.pds.pfp_max, epochs, s.seed);
  std::ofstream f = open_out(dir / "verdicts.csv");
  f << "t,ll,is_attack,alt_east,alt_north\n";
  long flagged = 0, decided = 0;
  for (const pds::Verdict& v : verdicts) {
    f << num(v.t) << ',' << num(v.log_likelihood) << ',' << (v.is_attack ? 1 : 0) << ','
      << (v.alt_available ? num(v.alt_position.east) : "NA") << ','
      << (v.alt_available ? num(v.alt_position.north) : "NA") << '\n';
    if (v.warmup) continue;
    ++decided;
    if (v.is_attack) ++flagged;
  }
  echo_config(dir, s);
  std::cout << decided << " decided epochs, " << flagged << " flagged\n";
  return kOk;
}

int cmd_calibrate(const CommonArgs& args, const std::vector<std::string>& trace_paths) {
  pds::Settings s = build_settings(args, "eval.calibration_seed");
  const fs::path dir = prepare_out(args.out);
  std::vector<std::vector<pds::EpochData>> traces;
  if (trace_paths.empty()) {
    traces = synthetic_calibration_set(s.experiment);
  } else {
    for (const std::string& p : trace_paths) traces.push_back(load_epochs(p, s));
  }
  calibrate_into(s, traces);
  std::ofstream f = open_out(dir / "calibration.txt");
  pds::write_config(f, s);
  echo_config(dir, s);
  std::cout << pds::to_string(s.detector) << " threshold " << num(*s.threshold) << " at pfp_max "
            << num(s.experiment.pds.pfp_max) << '\n';
  return kOk;
}

int cmd_benchmark(const CommonArgs& args) {
  const pds::Settings s = build_settings(args, "eval.first_seed");
  const fs::path dir = prepare_out(args.out);
  echo_config(dir, s);
  const pds::ExperimentReport report = pds::run_experiment(s.experiment);
  {
    std::ofstream f = open_out(dir / "report.csv");
    pds::write_report_csv(f, report);
  }
  {
    std::ofstream f = open_out(dir / "summary.csv");
    const auto rows = pds::summarize(report);
    pds::write_summary_csv(f, rows);
  }
  {
    std::ofstream f = open_out(dir / "timing.txt");
    f << "runtime_s = " << num(report.runtime_s) << '\n';
  }
  std::size_t failed = 0;
  for (const pds::CellResult& r : report.rows) {
    if (r.error.empty()) continue;
    ++failed;
    std::cerr << "cell " << r.detector << ':' << pds::to_string(r.mode) << " D=" << num(r.deviation)
              << " pfp=" << num(r.pfp_max) << " seed=" << r.seed << ": " << r.error << '\n';
  }
  std::cout << report.rows.size() << " cells, " << failed << " failed, " << num(report.runtime_s) << " s\n";
  return failed == 0 ? kOk : kData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNSS spoofing detection toolkit"};
  app.require_subcommand(1);

  CommonArgs sim_args, det_args, cal_args, bench_args;
  std::string detect_trace;
  std::vector<std::string> cal_traces;

  CLI::App* sim = app.add_subcommand("simulate", "write a synthetic trace (spoofed when simulate.deviation > 0)");
  add_common(sim, sim_args);
  CLI::App* det = app.add_subcommand("detect", "run one detector over a trace and write per-epoch verdicts");
  add_common(det, det_args);
  det->add_option("trace", detect_trace, "trace directory or positions CSV")->required();
  CLI::App* cal = app.add_subcommand("calibrate", "fit covariances and threshold; writes a loadable config");
  add_common(cal, cal_args);
  cal->add_option("traces", cal_traces, "benign trace directories (default: synthetic)");
  CLI::App* bench = app.add_subcommand("benchmark", "run the experiment matrix and write report CSVs");
  add_common(bench, bench_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (det->parsed()) return cmd_detect(det_args, detect_trace);
    if (cal->parsed()) return cmd_calibrate(cal_args, cal_traces);
    if (bench->parsed()) return cmd_benchmark(bench_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const pds::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
