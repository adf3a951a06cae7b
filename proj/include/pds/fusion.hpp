#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pds/geo.hpp"
#include "pds/gp.hpp"
#include "pds/regression.hpp"

namespace pds {

/// Kernel weights over the epochs of a window, renormalized to sum to one.
/// Entry i belongs to times[i]; the kernel is centred on `now`.
std::vector<double> temporal_weights(std::span<const double> times, double now,
                                     const KernelSpec& kernel);

/// Gaussian summary of one source, Z(m, t) after temporal fusion.
struct SourceGaussian {
  int source = 0;
  EnuPoint mean;
  Vec2 sigma = Vec2::Ones();
};

/// Weighted sum of independent Gaussians: mean sum(K mu), variance
/// sum(K^2 var). Throws InsufficientData on an empty window and
/// InvalidInput when the weight count does not match.
SourceGaussian temporal_fuse(std::span<const GaussianInterval> intervals,
                             std::span<const double> weights);

/// Product of per-source Gaussians written as S * N(mu, sigma^2) per axis.
struct FusedGaussian {
  EnuPoint mean;
  Vec2 sigma = Vec2::Ones();
  Vec2 log_scale = Vec2::Zero();  // log S per axis
  int sources = 0;
};

/// Throws InvalidInput on an empty list and NumericalFailure when any sigma
/// is zero (callers floor sigmas first).
FusedGaussian categorical_fuse(std::span<const SourceGaussian> zs);

/// log of the fused density S * N(mu, sigma^2) at `weighted_gnss`, summed
/// over both axes. Equals the sum of per-source Gaussian log densities.
double log_likelihood(const FusedGaussian& fused, const EnuPoint& weighted_gnss);

/// Largest threshold on the benign sample such that the fraction of benign
/// log-likelihoods at or below it does not exceed pfp_max. With pfp_max small
/// enough that no sample may be flagged, returns a value below the minimum.
double calibrate_threshold(std::span<const double> benign_lls, double pfp_max);

/// Alarm rate pooled over traces, with the standard error of the ratio
/// clustered by trace (alarms under feedback come in bursts).
struct AlarmRate {
  double rate = 0.0;
  double se = 0.0;
};

/// Throws InvalidInput when the spans differ in length.
AlarmRate pooled_alarm_rate(std::span<const long> alarms, std::span<const long> decided);

/// Alarms feed back into a detector (GNSS quarantine, skipped filter
/// updates), so the open-loop quantile can overshoot the cap once the
/// detector runs with it. In that case searches the benign sample for the
/// largest threshold whose closed-loop rate `fpr_at(gamma)` plus one standard
/// error stays within pfp_max, assuming the rate is non-decreasing in gamma.
double calibrate_closed_loop(std::span<const double> benign_lls, double pfp_max,
                             const std::function<AlarmRate(double)>& fpr_at);

/// Precision-weighted combined mean of the given sources; nullopt when the
/// list is empty.
std::optional<EnuPoint> alternative_position(std::span<const SourceGaussian> sources);

struct SourceDiagnostic {
  int source = 0;
  EnuPoint z_mean;
  Vec2 z_sigma = Vec2::Zero();
  EnuPoint current_mean;  // interval at the decision epoch
  Vec2 current_sigma = Vec2::Zero();
};

struct Verdict {
  double t = 0.0;
  double log_likelihood = 0.0;
  double threshold = 0.0;
  bool is_attack = false;
  EnuPoint alt_position;
  bool alt_available = false;
  bool warmup = false;      // window still being seeded; not a decision
  bool no_sources = false;  // nothing usable this epoch, decision carried over
  std::vector<SourceDiagnostic> per_source;
};

}  // namespace pds
