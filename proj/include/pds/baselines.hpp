#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "pds/detector.hpp"
#include "pds/fusion.hpp"
#include "pds/geo.hpp"
#include "pds/sim.hpp"

namespace pds {

/// Per-axis noise variances assumed for GNSS, Wi-Fi and cellular fixes.
using SourceVariances = std::array<double, kSourceCount>;
inline constexpr SourceVariances kDefaultSourceVariances{0.9, 33.0, 9.0};

// ---- WCL distance ---------------------------------------------------------

/// Precision-weighted combination of the raw network fixes of one epoch.
std::optional<EnuPoint> network_estimate(const EpochData& e, const SourceVariances& var);

/// |y_est - gnss| > threshold; nullopt when there is no network estimate.
std::optional<bool> wcl_distance_detect(const std::optional<EnuPoint>& y_est, const EnuPoint& gnss,
                                        double threshold);

// ---- EKF ------------------------------------------------------------------

/// Position and velocity in the level frame.
struct EkfState {
  Eigen::Vector4d x = Eigen::Vector4d::Zero();  // east, north, v_east, v_north
  Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
  double t = 0.0;
};

struct EkfNoise {
  double accel_psd = 0.5;     // m^2/s^3, white-noise acceleration spectral density
  double gnss_var = 0.9;      // m^2 per axis
  double velocity_var = 0.04; // (m/s)^2 per axis for the IMU speed channel
};

struct EkfStep {
  EkfState state;
  Vec2 innovation = Vec2::Zero();
  double nis = 0.0;         // normalized innovation squared of the GNSS fix
  bool detect = false;      // nis > nis_threshold; the GNSS update is skipped
  bool gnss_used = false;
};

/// Predict with the constant-velocity model driven by the rotated
/// acceleration, fuse the IMU velocity, then test and (unless flagged) fuse
/// the GNSS fix with a Joseph-form update. Throws NumericalFailure when the
/// covariance loses symmetry or positive semidefiniteness.
EkfStep ekf_step(const EkfState& state, const std::optional<MotionSample>& imu,
                 const std::optional<PositionSample>& gnss, const EkfNoise& noise,
                 double nis_threshold);

EkfState ekf_init(const EnuPoint& p, double t, double position_var, double velocity_var);

// ---- Particle filter -----------------------------------------------------

struct ParticleSet {
  std::vector<EnuPoint> particles;
  std::vector<double> weights;  // normalized
  double t = 0.0;

  double effective_size() const;
  EnuPoint mean() const;
};

struct PfConfig {
  int particles = 1000;
  double diffusion_sd = 0.3;    // m per sqrt(s)
  double obs_var = 0.9;         // m^2 per axis
  double reinit_spread = 20.0;  // m, half-width of the uniform reinitialization box
};

struct PfStep {
  ParticleSet set;
  EnuPoint estimate;
  double distance = 0.0;  // predicted estimate to observation
  bool detect = false;
  bool reinitialized = false;
};

ParticleSet uniform_particles(const EnuPoint& center, double half_width, int count,
                              std::mt19937_64& rng, double t = 0.0);
ParticleSet gaussian_particles(const EnuPoint& mean, double sd, int count, std::mt19937_64& rng,
                               double t = 0.0);

/// Propagates with the motion displacement plus diffusion, flags when the
/// predicted estimate is further than `distance_threshold` from the
/// observation, and otherwise reweights by the Gaussian observation
/// likelihood. Systematic resampling when the effective size drops below
/// half the particle count. Throws InvalidInput on an empty set.
PfStep pf_step(ParticleSet ps, const std::optional<PositionSample>& observation,
               const std::optional<MotionSample>& motion, const PfConfig& cfg,
               double distance_threshold, std::mt19937_64& rng);

/// Indices drawn by systematic resampling with a single uniform offset.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, double offset);

// ---- Combined metrics -----------------------------------------------------

/// Sum of the per-metric log-likelihoods compared with gamma; nullopt for an
/// empty metric set.
std::optional<bool> combined_metrics_detect(std::span<const double> metric_lls, double gamma);

/// Per-source Gaussian log-likelihoods of the GNSS fix against each network
/// fix, plus an IMU displacement term when motion is present.
std::vector<double> combined_metrics(const EpochData& e, const EpochData* previous,
                                     const SourceVariances& var, double displacement_var);

// ---- Per-trace runners -------------------------------------------------------

enum class Baseline { Wcl, Ekf, Pf, Combined };
const char* to_string(Baseline b);
Baseline baseline_from_string(const std::string& s);
Mode natural_mode(Baseline b);

struct BaselineConfig {
  SourceVariances source_var = kDefaultSourceVariances;
  EkfNoise ekf;
  PfConfig pf;
  double displacement_var = 1.0;  // m^2 per axis, combined-metrics IMU term
  double warmup = 20.0;           // s of undecided epochs, matching the PDS window
};

/// Runs one baseline over a trace. Verdict::log_likelihood carries the
/// baseline's score (lower is more suspicious) and is_attack = score <=
/// threshold. Alternative positions: the network estimate for WCL and
/// combined metrics, the filter estimate for EKF and PF.
std::vector<Verdict> run_baseline(Baseline kind, std::span<const EpochData> epochs,
                                  const BaselineConfig& cfg, double threshold, std::uint64_t seed);

/// Benign scores for calibration (threshold -inf, warmup excluded).
std::vector<double> baseline_scores(Baseline kind, std::span<const EpochData> epochs,
                                    const BaselineConfig& cfg, std::uint64_t seed);

}  // namespace pds
