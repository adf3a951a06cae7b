#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pds/geo.hpp"

namespace pds {

enum class Source { Gnss, Wifi, Cellular, Truth };

const char* to_string(Source s);
Source source_from_string(const std::string& s);  // throws InvalidInput

struct PositionSample {
  double t = 0.0;
  Source source = Source::Gnss;
  EnuPoint p;
  bool available = true;  // when false, p carries no meaning
};

struct TraceConfig {
  double duration = 600.0;       // s
  double gnss_rate = 1.0;        // Hz
  double imu_rate = 200.0;       // Hz, integer multiple of gnss_rate
  double gnss_noise_var = 0.9;   // m^2 per axis
  double wifi_noise_var = 33.0;  // m^2 per axis
  double cell_noise_var = 9.0;   // m^2 per axis
  double unavailability = 0.05;  // per-epoch Bernoulli, networks only
  int anchor_count = 4;
  double anchor_offset = 50.0;   // m
  double anchor_jitter = 0.1;    // relative radial jitter of surrounding anchors
  double wifi_tx_power = 20.0;   // dBm
  double cell_tx_power = 43.0;   // dBm
  double path_loss_exponent = 2.0;
  double speed = 10.0;           // m/s, STRAIGHT and ARC
  double yaw_rate = 0.1;         // rad/s, ARC
  std::uint64_t rng_seed = 1;

  void validate() const;  // throws ConfigError
};

enum class TraceShape { Straight, Arc, RandomWaypoint };
const char* to_string(TraceShape s);
TraceShape shape_from_string(const std::string& s);

struct TruthTrace {
  std::vector<PositionSample> positions;  // TRUTH, at gnss_rate
  std::vector<MotionSample> motion;       // at imu_rate
};

/// Kinematically consistent platform track starting at the origin. Speed
/// never exceeds 25 m/s.
TruthTrace generate_truth_trace(const TraceConfig& cfg, TraceShape shape);

/// Truth plus independent zero-mean Gaussian noise per axis.
std::vector<PositionSample> synth_gnss(std::span<const PositionSample> truth,
                                       const TraceConfig& cfg);

enum class AnchorKind { AccessPoint, BaseStation };

struct Anchor {
  int id = 0;
  EnuPoint p;
  AnchorKind kind = AnchorKind::AccessPoint;
  double tx_power = 20.0;  // dBm
  double path_loss_exponent = 2.0;
};

/// Log-distance path loss received power in dBm (1 m reference, distance
/// floored at 1 m).
double received_power_dbm(const Anchor& a, const EnuPoint& receiver);

/// RSS-weighted centroid with linear-power weights. Throws ConfigError with
/// fewer than three anchors.
EnuPoint weighted_centroid(std::span<const Anchor> anchors, const EnuPoint& receiver);

/// Evenly spread anchors around `center` at cfg.anchor_offset with a random
/// rotation and relative radial jitter.
std::vector<Anchor> place_anchors_around(const EnuPoint& center, AnchorKind kind,
                                         const TraceConfig& cfg, std::mt19937_64& rng);

/// WCL fixes against a fixed anchor set, plus noise and unavailability.
std::vector<PositionSample> synth_network_positions(std::span<const PositionSample> truth,
                                                    std::span<const Anchor> anchors,
                                                    Source kind, const TraceConfig& cfg);

/// WCL fixes where each epoch sees its own anchor constellation placed
/// around the true position.
std::vector<PositionSample> synth_network_positions(std::span<const PositionSample> truth,
                                                    Source kind, const TraceConfig& cfg);

struct DriftConfig {
  double accel_noise_sd = 0.05;     // m/s^2 white noise
  double accel_bias_sd = 0.02;      // m/s^2, initial bias draw
  double accel_bias_walk = 0.002;   // m/s^2 per sqrt(s)
  double vel_noise_sd = 0.05;       // m/s white noise
  double vel_bias_sd = 0.1;         // m/s, initial bias draw
  double vel_bias_walk = 0.005;     // m/s per sqrt(s)
  Vec3 accel_bias_offset = Vec3::Zero();  // deterministic part of the bias
  Vec3 vel_bias_offset = Vec3::Zero();

  static DriftConfig none();
};

/// Adds white noise and an integrating bias to the body-frame channels so
/// that pure dead reckoning drifts without bound.
std::vector<MotionSample> synth_imu(std::span<const MotionSample> truth_motion,
                                    const DriftConfig& drift, std::uint64_t seed);

struct AttackConfig {
  double onset = 300.0;            // s
  double stage1_duration = 10.0;   // s of constant profiling offset
  double profile_offset = 5.0;     // m
  double growth_rate = 1.5;        // factor per second in stage 2
  double max_deviation = 10.0;     // m
  Vec2 direction = Vec2(1.0, 0.0);  // unit, level frame

  void validate() const;  // throws ConfigError
};

/// Deviation magnitude at time t; zero before onset.
double deviation_at(const AttackConfig& atk, double t);

/// Adds deviation_at(t) * direction to every sample at or after onset.
std::vector<PositionSample> apply_spoofing(std::span<const PositionSample> gnss,
                                           const AttackConfig& atk);

/// Unit vector pointing to the platform's right at time t (lateral to the
/// heading).
Vec2 lateral_direction(std::span<const MotionSample> truth_motion, double t);

/// All streams of one recorded or synthesized run.
struct Trace {
  std::vector<PositionSample> positions;  // any mix of sources, incl. TRUTH
  std::vector<MotionSample> motion;       // may be empty

  std::vector<PositionSample> stream(Source s) const;
};

struct Scenario {
  Trace trace;
  std::vector<PositionSample> benign_gnss;
  std::optional<AttackConfig> attack;
};

/// Truth, GNSS (spoofed when an attack is given), Wi-Fi, cellular and IMU
/// streams for one seed.
Scenario make_scenario(const TraceConfig& cfg, TraceShape shape, const DriftConfig& drift,
                       const std::optional<AttackConfig>& attack);

/// Writes positions.csv and, when motion is present, motion.csv into dir.
void write_trace(const std::filesystem::path& dir, const Trace& trace);

/// Reads a trace directory (or a positions CSV file with an optional
/// motion.csv next to it). Throws ParseError with the line number of a
/// malformed row and ValidationError for empty or non-monotonic streams.
Trace load_trace(const std::filesystem::path& path);

}  // namespace pds
