#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>

#include "pds/geo.hpp"

namespace pds {

enum class KernelKind { Rbf, Tricube };

/// Recency kernel K_loc over time offsets. RBF is exp(-(d/h)^2); tricube is
/// (1 - |d/h|^3)^3 inside |d| < h and zero outside.
struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double bandwidth = 10.0;  // seconds

  double operator()(double offset) const;
};

struct TimedPoint {
  double t = 0.0;
  EnuPoint p;
};

/// Kernel-weighted polynomial trajectory fit. Coefficients are stored in the
/// shifted time basis tau = t - fit_time, so column 0 is the fitted position
/// at fit_time.
struct PolyFit {
  Eigen::Matrix<double, 2, Eigen::Dynamic> coeffs;
  int order = 0;
  double fit_time = 0.0;
  double window_begin = 0.0;
  double window_end = 0.0;

  // Box-constraint bookkeeping per axis (east, north). Multipliers are zero
  // for an inactive side.
  std::array<bool, 2> clamped{false, false};
  std::array<double, 2> lower_multiplier{0.0, 0.0};
  std::array<double, 2> upper_multiplier{0.0, 0.0};

  EnuPoint predict(double t) const;

  /// True when t lies outside [window_begin, fit_time].
  bool extrapolates(double t) const { return t < window_begin || t > fit_time; }
};

/// |W t' - anchor| <= tolerance, per axis.
struct MotionConstraint {
  EnuPoint anchor;
  Vec2 tolerance = Vec2::Zero();
};

/// Weighted least squares over the window. Throws DegenerateFit when the
/// design is rank deficient and InvalidInput on a non-positive kernel weight.
PolyFit fit_unconstrained(std::span<const TimedPoint> points, double fit_time, int order,
                          const KernelSpec& kernel);

/// Same objective with the fitted position at fit_time boxed around the
/// dead-reckoned anchor. Each axis is a convex quadratic whose feasible set
/// is an interval of the intercept, so the optimum is the clamped intercept
/// with the remaining coefficients re-solved.
PolyFit fit_constrained(std::span<const TimedPoint> points, double fit_time, int order,
                        const KernelSpec& kernel, const MotionConstraint& constraint);

inline EnuPoint predict(const PolyFit& fit, double t) { return fit.predict(t); }

/// Sum over the window of K_loc(t - fit_time) * |W t - p(t)|^2.
double fit_objective(const PolyFit& fit, std::span<const TimedPoint> points,
                     const KernelSpec& kernel);

struct AnchorState {
  EnuPoint position;
  MotionSample motion;  // sample at the anchor time; motion.t is that time
};

/// Dead-reckons `last` forward to t_target. Without a speed channel the
/// velocity is the trapezoidal integral of `accel_history` (starting from
/// rest); without an accelerometer the motion is taken as uniform.
/// Throws MissingState when there is no prior state.
EnuPoint dead_reckon_anchor(const std::optional<AnchorState>& last, double t_target,
                            std::span<const MotionSample> accel_history = {});

}  // namespace pds
