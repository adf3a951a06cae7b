#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pds/baselines.hpp"
#include "pds/detector.hpp"
#include "pds/sim.hpp"

namespace pds {

struct EpochLabel {
  double t = 0.0;
  bool truth_attack = false;
  bool verdict_attack = false;
};

/// Rates are nullopt when their denominator is zero.
struct Rates {
  std::optional<double> p_tp;
  std::optional<double> p_fp;
};

/// Per-epoch N_TP / N_P and N_FP / (N - N_P). Throws InvalidInput on an
/// empty list.
Rates tpr_fpr(std::span<const EpochLabel> labels);

/// First flagged attack epoch minus the first attack epoch; nullopt when the
/// attack is never flagged. Throws InvalidInput when no epoch is attacked.
std::optional<double> detection_delay(std::span<const EpochLabel> labels);

struct MaeStats {
  double mean = 0.0;
  double top20 = 0.0;     // mean of the largest ceil(20%)
  double bottom20 = 0.0;  // mean of the smallest ceil(20%)
};

/// Throws InvalidInput on an empty list.
MaeStats mae_stats(std::span<const double> errors);

/// Labels for the decided (non-warmup) verdicts. With `label_stage1` false
/// the constant-offset profiling stage counts as benign.
std::vector<EpochLabel> label_verdicts(std::span<const Verdict> verdicts,
                                       const std::optional<AttackConfig>& attack,
                                       bool label_stage1 = true);

/// Detector under test: PDS in one of its modes, or a baseline.
struct DetectorSpec {
  std::string name = "PDS";  // PDS, WCL, EKF, PF, COMBINED
  Mode mode = Mode::All;

  bool is_pds() const { return name == "PDS"; }
};

DetectorSpec parse_detector_spec(const std::string& text);  // "PDS:ALL", "WCL", ...
std::string to_string(const DetectorSpec& d);

struct ExperimentConfig {
  std::vector<DetectorSpec> detectors{{"PDS", Mode::NetworksOnly}};
  std::vector<double> deviations{10.0};
  std::vector<double> pfp_max{0.1};
  int seeds = 20;
  std::uint64_t first_seed = 1000;
  int calibration_traces = 20;
  std::uint64_t calibration_seed = 1;  // calibration seeds are calibration_seed + k
  TraceConfig trace;
  TraceShape shape = TraceShape::Arc;
  DriftConfig drift;
  AttackConfig attack;               // onset, stage1 and growth; deviation set per cell
  double profile_fraction = 1.0;     // stage-1 offset as a fraction of the deviation
  DetectorConfig pds;
  BaselineConfig baselines;
  bool label_stage1 = true;
  unsigned threads = 0;              // 0: hardware concurrency

  void validate() const;  // throws ConfigError
};

struct CellResult {
  std::string detector;
  Mode mode = Mode::All;
  double deviation = 0.0;
  double pfp_max = 0.0;
  std::uint64_t seed = 0;
  Rates rates;
  std::optional<double> delay;
  std::optional<MaeStats> mae;
  std::optional<double> gnss_error;  // mean spoofed-GNSS error over the same epochs
  std::string error;                 // non-empty when the cell failed
};

struct ExperimentReport {
  std::vector<CellResult> rows;
  double runtime_s = 0.0;

  bool all_ok() const;
};

/// Attack for one deviation cell.
AttackConfig attack_for(const ExperimentConfig& cfg, double deviation);

/// Benign epochs for one calibration or test seed.
std::vector<EpochData> benign_epochs(const ExperimentConfig& cfg, std::uint64_t seed);

/// Fitted state for one detector: PDS covariances (copied from the config for
/// baselines) and one threshold per cfg.pfp_max entry.
struct DetectorCalibration {
  DetectorSpec spec;
  std::array<CovarianceFn, kSourceCount> covariance{};
  std::vector<double> thresholds;
  std::vector<double> scores;  // benign scores the thresholds came from
};

/// Throws CalibrationError (or the underlying error) when calibration fails.
DetectorCalibration calibrate_detector(const ExperimentConfig& cfg, const DetectorSpec& spec,
                                       std::span<const std::vector<EpochData>> cal_epochs);

/// One detector over one trace. `seed` drives stochastic baselines.
std::vector<Verdict> run_detector(const ExperimentConfig& cfg, const DetectorSpec& spec,
                                  const std::array<CovarianceFn, kSourceCount>& covariance,
                                  double threshold, double pfp, std::span<const EpochData> epochs,
                                  std::uint64_t seed);

/// Runs the full matrix. Cells that throw are recorded with their error and
/// the rest continue. Rows are ordered by detector, deviation, pfp, seed
/// independent of scheduling.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

void write_report_csv(std::ostream& out, const ExperimentReport& report);

/// Mean over seeds per (detector, mode, deviation, pfp) with undefined
/// entries skipped.
struct SummaryRow {
  std::string detector;
  Mode mode = Mode::All;
  double deviation = 0.0;
  double pfp_max = 0.0;
  std::optional<double> p_tp, p_fp, delay, mae_mean, gnss_error;
  int seeds = 0;
  int failed = 0;
};
std::vector<SummaryRow> summarize(const ExperimentReport& report);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace pds
