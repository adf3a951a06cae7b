#pragma once

#include <array>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pds/fusion.hpp"
#include "pds/gp.hpp"
#include "pds/regression.hpp"
#include "pds/sim.hpp"

namespace pds {

enum class Mode { NetworksOnly, SensorsOnly, All };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);  // throws InvalidInput

struct DetectorConfig {
  Mode mode = Mode::All;
  double window = 20.0;  // seconds; also the epoch capacity at 1 Hz
  double pfp_max = 0.1;
  int poly_order = 2;
  Vec2 epsilon = Vec2::Constant(3.0);  // m/s, tolerance per second of propagation
  KernelSpec fit_kernel{KernelKind::Rbf, 10.0};
  KernelSpec temporal_kernel{KernelKind::Rbf, 6.0};
  std::array<CovarianceFn, kSourceCount> covariance{};
  double threshold = -std::numeric_limits<double>::infinity();  // gamma
  int readmit_after = 5;          // consecutive benign verdicts before GNSS rejoins the window
  // SENSORS_ONLY: the dead-reckoned chain standing in for quarantined fixes
  // moves toward the received fix by at most this rate per axis, absorbing
  // IMU drift while a spoofed offset stays visible.
  double drift_rate = 0.02;  // m/s
  double stand_in_gate = 1.0;  // m per axis the windowed stand-in may follow the received fix
  // SENSORS_ONLY: time constant for tracking the horizontal body-frame speed
  // bias from admitted GNSS; 0 disables the correction.
  double bias_time_constant = 20.0;  // s
  double align_tolerance = 0.5;   // s
  double min_sigma = 1e-3;        // m, floor on fused per-source sigma

  void validate() const;  // throws ConfigError
};

/// One decision epoch: what each source reported and the IMU aggregate since
/// the previous epoch (mean acceleration, latest velocity and attitude).
struct EpochData {
  double t = 0.0;
  std::array<std::optional<EnuPoint>, kSourceCount> p{};
  std::optional<MotionSample> motion;
};

/// Epochs at the GNSS timestamps. Network samples further than `tolerance`
/// from an epoch are treated as unavailable and reported in `warnings`.
std::vector<EpochData> align_epochs(const Trace& trace, double tolerance = 0.5,
                                    std::vector<std::string>* warnings = nullptr);

std::vector<EpochData> strip_motion(std::span<const EpochData> epochs);

/// Motion to dead-reckon across (prev.t, cur.t]: velocity and attitude from
/// the earlier epoch, acceleration averaged over the interval when present.
std::optional<MotionSample> interval_motion(const std::optional<MotionSample>& prev,
                                            const std::optional<MotionSample>& cur);

struct WindowEntry {
  double t = 0.0;
  std::array<std::optional<EnuPoint>, kSourceCount> p{};
  std::optional<MotionSample> motion;
  // Dead-reckoned GNSS-source estimate standing in for a quarantined fix.
  std::optional<EnuPoint> gnss_substitute;
};

/// The rolling benign sequence. Holds entries with t in (latest - capacity,
/// latest].
class WindowBuffer {
 public:
  explicit WindowBuffer(double capacity = 20.0) : capacity_(capacity) {}

  /// Throws InvalidInput unless e.t is later than the newest entry.
  void push(WindowEntry e);
  void clear() { entries_.clear(); }

  const std::deque<WindowEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const WindowEntry& back() const { return entries_.back(); }
  double capacity() const { return capacity_; }

 private:
  double capacity_;
  std::deque<WindowEntry> entries_;
};

/// Fitted covariances and threshold for one detector configuration.
struct Calibration {
  std::array<CovarianceFn, kSourceCount> covariance{};
  std::array<bool, kSourceCount> fitted{};
  double threshold = 0.0;
  std::vector<double> scores;  // benign log-likelihoods the threshold was taken from
};

class Detector {
 public:
  explicit Detector(DetectorConfig cfg);

  /// Screens one epoch and updates the window. Epoch times must increase.
  Verdict step(const EpochData& epoch);

  /// Clears all per-trace state; configuration is kept.
  void reset();

  /// Pushes epochs into the window without deciding (all GNSS admitted).
  void seed(std::span<const EpochData> epochs);

  const WindowBuffer& window() const { return window_; }
  const DetectorConfig& config() const { return cfg_; }
  bool gnss_quarantined() const { return quarantined_; }

  /// Residual series of every source's latest fit, for covariance fitting.
  const std::array<std::vector<Residual>, kSourceCount>& last_residuals() const {
    return last_residuals_;
  }

 private:
  struct Estimate {
    double t = 0.0;
    EnuPoint mean;
    Vec2 variance = Vec2::Zero();
  };
  struct SourceResult {
    SourceGaussian z;
    GaussianInterval current;
    bool constrained = false;
  };

  struct SourceFit {
    PolyFit fit;
    std::vector<Residual> residuals;
    std::optional<KrigingSystem> system;

    GaussianInterval interval(int m, double tau) const;
  };

  bool uses_source(int m) const;
  std::optional<EnuPoint> anchor_for(int m, double t, const std::optional<MotionSample>& motion) const;
  std::vector<TimedPoint> source_points(int m) const;
  std::optional<SourceFit> fit_source(int m, std::span<const TimedPoint> pts, double t,
                                      const std::optional<EnuPoint>& anchor, double dt) const;
  std::optional<SourceResult> evaluate_source(int m, double t, std::span<const double> eval_times,
                                              std::span<const double> weights,
                                              const std::optional<EnuPoint>& anchor);
  std::optional<Vec2> window_velocity_bias() const;
  std::optional<GaussianInterval> smoothed_interval(int m, double t,
                                                    const std::optional<EnuPoint>& anchor,
                                                    double dt) const;

  DetectorConfig cfg_;
  WindowBuffer window_;
  std::deque<std::pair<double, EnuPoint>> raw_gnss_;  // received GNSS, quarantined or not
  std::array<std::optional<Estimate>, kSourceCount> last_{};
  std::array<std::vector<Residual>, kSourceCount> last_residuals_{};
  bool quarantined_ = false;
  std::optional<Vec2> vel_bias_;  // body right/forward
  int benign_streak_ = 0;
  long epochs_ = 0;
  Verdict previous_;
  bool have_previous_ = false;
};

/// Throws ConfigError when the mode needs a stream the epochs never carry.
void check_streams(const DetectorConfig& cfg, std::span<const EpochData> epochs);

/// Runs a fresh detector over the epochs; one verdict per epoch.
std::vector<Verdict> run(std::span<const EpochData> epochs, const DetectorConfig& cfg);

/// Fits per-source covariances on the benign traces, then sets the threshold
/// from the benign log-likelihoods (warmup epochs excluded) via
/// closed_loop_threshold. Throws CalibrationError when a trace is shorter than the
/// window or yields no decisions.
Calibration calibrate(const DetectorConfig& cfg, std::span<const std::vector<EpochData>> benign);

/// Fraction of decided epochs flagged when the detector runs closed-loop
/// over benign traces.
AlarmRate benign_alarm_rate(const DetectorConfig& cfg, std::span<const std::vector<EpochData>> benign);

/// Threshold for `pfp_max` given calibrated covariances and benign scores,
/// tightened until the closed-loop alarm rate on the traces respects the cap.
double closed_loop_threshold(const DetectorConfig& cfg, std::span<const std::vector<EpochData>> benign,
                             std::span<const double> scores, double pfp_max);

inline DetectorConfig apply(DetectorConfig cfg, const Calibration& cal) {
  cfg.covariance = cal.covariance;
  cfg.threshold = cal.threshold;
  return cfg;
}

/// Calibrates on one benign trace and returns a detector whose window holds
/// that trace's final epochs.
Detector init(const DetectorConfig& cfg, std::span<const EpochData> calibration_trace);

}  // namespace pds
