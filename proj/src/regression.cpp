#include "pds/regression.hpp"

#include <algorithm>
#include <cmath>

#include "pds/error.hpp"

namespace pds {

double KernelSpec::operator()(double offset) const {
  const double u = offset / bandwidth;
  switch (kind) {
    case KernelKind::Rbf:
      return std::exp(-u * u);
    case KernelKind::Tricube: {
      const double a = std::abs(u);
      if (a >= 1.0) return 0.0;
      const double c = 1.0 - a * a * a;
      return c * c * c;
    }
  }
  return 0.0;
}

EnuPoint PolyFit::predict(double t) const {
  const double tau = t - fit_time;
  // Horner, highest power first.
  double e = 0.0, n = 0.0;
  for (int i = order; i >= 0; --i) {
    e = e * tau + coeffs(0, i);
    n = n * tau + coeffs(1, i);
  }
  return {e, n};
}

namespace {

struct Design {
  Eigen::MatrixXd x;        // sqrt(K)-scaled Vandermonde rows
  Eigen::MatrixXd y;        // sqrt(K)-scaled targets, k x 2
  Eigen::VectorXd sqrt_w;
  double begin = 0.0;
  double end = 0.0;
};

Design build_design(std::span<const TimedPoint> points, double fit_time, int order,
                    const KernelSpec& kernel) {
  if (order < 0) throw InvalidInput("polynomial order must be non-negative");
  if (!(kernel.bandwidth > 0.0)) throw InvalidInput("kernel bandwidth must be positive");
  const auto k = static_cast<Eigen::Index>(points.size());
  if (k < order + 1) throw DegenerateFit("fewer window points than polynomial coefficients");

  Design d;
  d.x.resize(k, order + 1);
  d.y.resize(k, 2);
  d.sqrt_w.resize(k);
  d.begin = points.front().t;
  d.end = points.front().t;
  for (Eigen::Index i = 0; i < k; ++i) {
    const TimedPoint& pt = points[static_cast<std::size_t>(i)];
    if (!std::isfinite(pt.t) || !pt.p.finite()) throw InvalidInput("non-finite window point");
    const double tau = pt.t - fit_time;
    const double w = kernel(tau);
    if (!(w > 0.0)) throw InvalidInput("kernel weight vanishes inside the window");
    const double sw = std::sqrt(w);
    d.sqrt_w(i) = sw;
    double pw = 1.0;
    for (int j = 0; j <= order; ++j) {
      d.x(i, j) = sw * pw;
      pw *= tau;
    }
    d.y(i, 0) = sw * pt.p.east;
    d.y(i, 1) = sw * pt.p.north;
    d.begin = std::min(d.begin, pt.t);
    d.end = std::max(d.end, pt.t);
  }
  return d;
}

Eigen::MatrixXd solve_ls(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  // Threshold relative to the largest pivot; duplicate timestamps make
  // columns dependent.
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) throw DegenerateFit("rank-deficient polynomial design");
  return qr.solve(y);
}

PolyFit make_fit(const Design& d, const Eigen::MatrixXd& beta, int order, double fit_time) {
  PolyFit fit;
  fit.order = order;
  fit.fit_time = fit_time;
  fit.window_begin = d.begin;
  fit.window_end = d.end;
  fit.coeffs = beta.transpose();
  return fit;
}

}  // namespace

PolyFit fit_unconstrained(std::span<const TimedPoint> points, double fit_time, int order,
                          const KernelSpec& kernel) {
  const Design d = build_design(points, fit_time, order, kernel);
  return make_fit(d, solve_ls(d.x, d.y), order, fit_time);
}

PolyFit fit_constrained(std::span<const TimedPoint> points, double fit_time, int order,
                        const KernelSpec& kernel, const MotionConstraint& constraint) {
  if (!(constraint.tolerance.array() >= 0.0).all() || !constraint.tolerance.allFinite())
    throw InvalidInput("constraint tolerance must be finite and non-negative");
  if (!constraint.anchor.finite()) throw InvalidInput("non-finite constraint anchor");

  const Design d = build_design(points, fit_time, order, kernel);
  Eigen::MatrixXd beta = solve_ls(d.x, d.y);
  PolyFit fit = make_fit(d, beta, order, fit_time);

  const Vec2 anchor = constraint.anchor.vec();
  for (int axis = 0; axis < 2; ++axis) {
    const double lo = anchor(axis) - constraint.tolerance(axis);
    const double hi = anchor(axis) + constraint.tolerance(axis);
    const double free_intercept = beta(0, axis);
    if (free_intercept >= lo && free_intercept <= hi) continue;

    const double clamp = std::clamp(free_intercept, lo, hi);
    Eigen::VectorXd col(order + 1);
    col(0) = clamp;
    if (order > 0) {
      const Eigen::MatrixXd rest = d.x.rightCols(order);
      const Eigen::VectorXd target = d.y.col(axis) - clamp * d.sqrt_w;
      col.tail(order) = solve_ls(rest, target);
    }
    fit.coeffs.row(axis) = col.transpose();
    fit.clamped[static_cast<std::size_t>(axis)] = true;

    // d/d(intercept) of the objective at the clamped optimum.
    const Eigen::VectorXd resid = d.y.col(axis) - d.x * col;
    const double grad = -2.0 * d.sqrt_w.dot(resid);
    if (clamp >= hi && free_intercept > hi) {
      fit.upper_multiplier[static_cast<std::size_t>(axis)] = -grad;
    } else {
      fit.lower_multiplier[static_cast<std::size_t>(axis)] = grad;
    }
  }
  return fit;
}

double fit_objective(const PolyFit& fit, std::span<const TimedPoint> points,
                     const KernelSpec& kernel) {
  double total = 0.0;
  for (const TimedPoint& pt : points) {
    const EnuPoint r = fit.predict(pt.t) - pt.p;
    total += kernel(pt.t - fit.fit_time) * (r.east * r.east + r.north * r.north);
  }
  return total;
}

EnuPoint dead_reckon_anchor(const std::optional<AnchorState>& last, double t_target,
                            std::span<const MotionSample> accel_history) {
  if (!last) throw MissingState("no prior state to dead-reckon from");
  const double dt = t_target - last->motion.t;
  if (!(dt > 0.0)) throw InvalidInput("anchor time must follow the last state");

  MotionSample m = last->motion;
  if (!m.has_velocity) {
    Vec3 v = Vec3::Zero();
    if (m.has_acceleration) {
      for (std::size_t i = 1; i < accel_history.size(); ++i) {
        const MotionSample& a0 = accel_history[i - 1];
        const MotionSample& a1 = accel_history[i];
        if (a1.t > m.t) break;
        v += 0.5 * (a0.a + a1.a) * (a1.t - a0.t);
      }
    }
    m.v = v;
    m.has_velocity = true;
  }
  return propagate_state(last->position, m, dt).position;
}

}  // namespace pds
