#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "pds/error.hpp"
#include "pds/regression.hpp"
#include "support.hpp"

using namespace pds;

namespace {

// Independent weighted least squares on one axis via the normal equations,
// in the unshifted time basis; returns the value at `at`.
double wls_value(const std::vector<TimedPoint>& pts, double fit_time, int order, const KernelSpec& k,
                 int axis, double at) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd X(n, order + 1);
  Eigen::VectorXd y(n), w(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= order; ++j) X(i, j) = std::pow(pts[i].t, j);
    y(i) = pts[i].p.vec()(axis);
    w(i) = k(pts[i].t - fit_time);
  }
  const Eigen::MatrixXd A = X.transpose() * w.asDiagonal() * X;
  const Eigen::VectorXd b = X.transpose() * w.asDiagonal() * y;
  const Eigen::VectorXd beta = A.fullPivLu().solve(b);
  double v = 0.0;
  for (int j = 0; j <= order; ++j) v += beta(j) * std::pow(at, j);
  return v;
}

// Weighted squared error of one axis with the value at fit_time pinned to
// `c`, the remaining coefficients solved by a dense least squares.
double pinned_axis_objective(const std::vector<TimedPoint>& pts, double fit_time, int order,
                             const KernelSpec& k, int axis, double c) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd X(n, order);
  Eigen::VectorXd y(n), sw(n);
  for (int i = 0; i < n; ++i) {
    const double tau = pts[i].t - fit_time;
    for (int j = 1; j <= order; ++j) X(i, j - 1) = std::pow(tau, j);
    y(i) = pts[i].p.vec()(axis) - c;
    sw(i) = std::sqrt(k(tau));
  }
  const Eigen::VectorXd beta = (sw.asDiagonal() * X).colPivHouseholderQr().solve(sw.asDiagonal() * y);
  return (sw.asDiagonal() * (X * beta - y)).squaredNorm();
}

double axis_objective(const PolyFit& fit, const std::vector<TimedPoint>& pts, const KernelSpec& k, int axis) {
  double s = 0.0;
  for (const TimedPoint& q : pts) {
    const double r = fit.predict(q.t).vec()(axis) - q.p.vec()(axis);
    s += k(q.t - fit.fit_time) * r * r;
  }
  return s;
}

std::vector<TimedPoint> noisy_window(std::mt19937_64& rng, int n, double noise = 1.0) {
  std::normal_distribution<double> g(0.0, noise), c(0.0, 2.0);
  const double a0 = c(rng), a1 = c(rng), a2 = 0.1 * c(rng), b0 = c(rng), b1 = c(rng), b2 = 0.1 * c(rng);
  std::vector<TimedPoint> pts;
  for (int i = 0; i < n; ++i) {
    const double t = 100.0 + i;
    const double s = i;
    pts.push_back({t, {a0 + a1 * s + a2 * s * s + g(rng), b0 + b1 * s + b2 * s * s + g(rng)}});
  }
  return pts;
}

}  // namespace

TEST_CASE("fit_unconstrained: constant data gives a constant fit") {
  std::vector<TimedPoint> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({static_cast<double>(i), {4.0, -2.0}});
  for (KernelSpec k : {KernelSpec{KernelKind::Rbf, 3.0}, KernelSpec{KernelKind::Tricube, 10.0}}) {
    const PolyFit f = fit_unconstrained(pts, 5.0, 2, k);
    for (double t : {-3.0, 0.0, 5.0, 9.0}) {
      CHECK(f.predict(t).east == doctest::Approx(4.0).epsilon(1e-12));
      CHECK(f.predict(t).north == doctest::Approx(-2.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("fit_unconstrained: exact line has zero residual") {
  std::vector<TimedPoint> pts;
  for (int i = 0; i < 8; ++i) pts.push_back({10.0 + i, {1.0 + 2.0 * i, 3.0 - 0.5 * i}});
  for (int order : {1, 2, 3}) {
    const PolyFit f = fit_unconstrained(pts, 17.0, order, {});
    CHECK(fit_objective(f, pts, {}) < 1e-18);
    CHECK(f.predict(20.0).east == doctest::Approx(21.0).epsilon(1e-10));
  }
}

TEST_CASE("fit_unconstrained: matches the normal-equations oracle") {
  const std::vector<TimedPoint> pts{
      {0.0, {0.3, 1.1}}, {1.0, {1.4, 0.2}}, {2.0, {1.9, -0.8}}, {3.0, {3.6, -1.1}}, {4.0, {4.1, -2.9}}};
  const KernelSpec k{KernelKind::Rbf, 2.5};
  const PolyFit f = fit_unconstrained(pts, 4.0, 2, k);
  for (double t : {0.0, 2.5, 4.0, 6.0}) {
    CHECK(std::abs(f.predict(t).east - wls_value(pts, 4.0, 2, k, 0, t)) < 1e-8);
    CHECK(std::abs(f.predict(t).north - wls_value(pts, 4.0, 2, k, 1, t)) < 1e-8);
  }
}

TEST_CASE("fit_unconstrained: rank-deficient designs are rejected") {
  const std::vector<TimedPoint> two{{0.0, {0, 0}}, {1.0, {1, 1}}};
  CHECK_THROWS_AS(fit_unconstrained(two, 1.0, 2, {}), DegenerateFit);
  const std::vector<TimedPoint> dup{{1.0, {0, 0}}, {1.0, {1, 1}}, {1.0, {2, 2}}};
  CHECK_THROWS_AS(fit_unconstrained(dup, 1.0, 2, {}), DegenerateFit);
}

TEST_CASE("fit_constrained: inactive constraint leaves the fit unchanged") {
  std::mt19937_64 rng(1);
  const auto pts = noisy_window(rng, 20);
  const PolyFit free = fit_unconstrained(pts, 119.0, 2, {});
  const PolyFit boxed = fit_constrained(pts, 119.0, 2, {}, {free.predict(119.0), Vec2(0.5, 0.5)});
  CHECK(testing_support::max_abs(boxed.coeffs - free.coeffs) < 1e-8);
  CHECK_FALSE(boxed.clamped[0]);
  CHECK_FALSE(boxed.clamped[1]);
}

TEST_CASE("fit_constrained: zero tolerance pins the endpoint") {
  std::mt19937_64 rng(2);
  const auto pts = noisy_window(rng, 20);
  const EnuPoint anchor{-50.0, 75.0};
  const PolyFit f = fit_constrained(pts, 119.0, 2, {}, {anchor, Vec2::Zero()});
  CHECK(f.predict(119.0).east == -50.0);
  CHECK(f.predict(119.0).north == 75.0);
}

TEST_CASE("fit_constrained: active east constraint matches a brute-force search") {
  std::mt19937_64 rng(3);
  const auto pts = noisy_window(rng, 20);
  const KernelSpec k{KernelKind::Rbf, 10.0};
  const PolyFit free = fit_unconstrained(pts, 119.0, 2, k);
  const EnuPoint anchor{free.predict(119.0).east + 4.0, free.predict(119.0).north};
  const Vec2 tol(1.5, 1.5);
  const PolyFit boxed = fit_constrained(pts, 119.0, 2, k, {anchor, tol});
  CHECK(boxed.clamped[0]);
  CHECK_FALSE(boxed.clamped[1]);

  // Scan the intercept across the feasible interval.
  double best = std::numeric_limits<double>::infinity();
  const int steps = 20000;
  for (int i = 0; i <= steps; ++i) {
    const double c = anchor.east - tol.x() + 2.0 * tol.x() * i / steps;
    best = std::min(best, pinned_axis_objective(pts, 119.0, 2, k, 0, c));
  }
  const double got = axis_objective(boxed, pts, k, 0);
  CHECK(std::abs(got - best) < 1e-4);
  CHECK(got >= axis_objective(free, pts, k, 0));
  CHECK(boxed.lower_multiplier[0] > 0.0);
  CHECK(boxed.upper_multiplier[0] == 0.0);
}

TEST_CASE("predict: constant, linear and quadratic recovery") {
  const std::vector<TimedPoint> line{{0.0, {0.0, 0.0}}, {1.0, {1.0, 2.0}}};
  const PolyFit lin = fit_unconstrained(line, 1.0, 1, {});
  CHECK(lin.predict(2.0).east == doctest::Approx(2.0));
  CHECK(lin.predict(2.0).north == doctest::Approx(4.0));
  CHECK(lin.extrapolates(2.0));
  CHECK_FALSE(lin.extrapolates(0.5));

  std::vector<TimedPoint> sq;
  for (int i = 0; i <= 4; ++i) sq.push_back({static_cast<double>(i), {static_cast<double>(i * i), 0.0}});
  const PolyFit quad = fit_unconstrained(sq, 4.0, 2, {});
  CHECK(std::abs(quad.predict(5.0).east - 25.0) < 1e-9);
  CHECK(std::abs(quad.predict(5.0).north) < 1e-9);
  CHECK(predict(quad, 5.0) == quad.predict(5.0));
}

TEST_CASE("dead_reckon_anchor: stationary, forward, integrated and missing") {
  AnchorState s;
  s.position = {5.0, 6.0};
  s.motion.t = 10.0;
  CHECK(dead_reckon_anchor(s, 11.0) == s.position);

  s.motion.v = Vec3(0.0, 10.0, 0.0);
  const EnuPoint fwd = dead_reckon_anchor(s, 11.0);
  CHECK(fwd.east == doctest::Approx(5.0));
  CHECK(fwd.north == doctest::Approx(16.0));

  // No speed channel: v(T) = a T from rest, then p + v dt + a dt^2 / 2.
  std::vector<MotionSample> hist;
  for (int i = 0; i <= 10; ++i) {
    MotionSample m;
    m.t = 0.5 * i;
    m.a = Vec3(0.0, 1.2, 0.0);
    m.has_velocity = false;
    hist.push_back(m);
  }
  AnchorState blind{{0.0, 0.0}, hist.back()};
  const double T = 5.0, dt = 2.0, a = 1.2;
  const EnuPoint p = dead_reckon_anchor(blind, T + dt, hist);
  CHECK(std::abs(p.north - (a * T * dt + 0.5 * a * dt * dt)) < 1e-6);
  CHECK(std::abs(p.east) < 1e-12);

  CHECK_THROWS_AS(dead_reckon_anchor(std::nullopt, 1.0), MissingState);
}

TEST_CASE("property: constrained fits satisfy KKT and beat feasible perturbations") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> off(-6.0, 6.0), tol(0.0, 3.0);
  std::normal_distribution<double> dn(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pts = noisy_window(rng, 8 + trial % 13);
    const double ft = pts.back().t;
    const KernelSpec k{trial % 2 ? KernelKind::Rbf : KernelKind::Tricube, 21.0 + trial % 7};
    const PolyFit free = fit_unconstrained(pts, ft, 2, k);
    const EnuPoint anchor{free.predict(ft).east + off(rng), free.predict(ft).north + off(rng)};
    const Vec2 box(tol(rng), tol(rng));
    const PolyFit f = fit_constrained(pts, ft, 2, k, {anchor, box});
    const double obj = fit_objective(f, pts, k);

    for (int axis = 0; axis < 2; ++axis) {
      const double val = f.predict(ft).vec()(axis);
      const double lo = anchor.vec()(axis) - box(axis), hi = anchor.vec()(axis) + box(axis);
      // Primal feasibility, dual feasibility, complementary slackness.
      REQUIRE(val >= lo - 1e-9);
      REQUIRE(val <= hi + 1e-9);
      REQUIRE(f.lower_multiplier[axis] >= 0.0);
      REQUIRE(f.upper_multiplier[axis] >= 0.0);
      REQUIRE(f.lower_multiplier[axis] * (val - lo) < 1e-6);
      REQUIRE(f.upper_multiplier[axis] * (hi - val) < 1e-6);
    }

    for (int j = 0; j < 100; ++j) {
      PolyFit g = f;
      Eigen::Matrix<double, 2, Eigen::Dynamic> d(2, f.coeffs.cols());
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < d.cols(); ++c) d(r, c) = dn(rng);
      d *= 1e-3 / d.norm();
      g.coeffs += d;
      const Vec2 v = g.predict(ft).vec();
      if (std::abs(v.x() - anchor.east) > box.x() || std::abs(v.y() - anchor.north) > box.y())
        continue;  // infeasible perturbation
      REQUIRE(obj <= fit_objective(g, pts, k) + 1e-12);
    }
  }
}

TEST_CASE("property: objective Hessian is positive definite") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(3, 20);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = len(rng);
    const KernelSpec k{KernelKind::Rbf, 10.0};
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (int i = 0; i < n; ++i) {
      const double tau = -static_cast<double>(n - 1 - i);
      const Eigen::Vector3d tv(1.0, tau, tau * tau);
      h += 2.0 * k(tau) * tv * tv.transpose();
    }
    Eigen::Matrix<double, 6, 6> full = Eigen::Matrix<double, 6, 6>::Zero();
    full.topLeftCorner<3, 3>() = h;
    full.bottomRightCorner<3, 3>() = h;
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>>(full).eigenvalues().minCoeff();
    REQUIRE(min_eig > 0.0);
  }
}

TEST_CASE("property: axes separate") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pts = noisy_window(rng, 15);
    const double ft = pts.back().t;
    const MotionConstraint c{{3.0, -4.0}, Vec2(0.5, 0.5)};
    const PolyFit joint = fit_constrained(pts, ft, 2, {}, c);

    // East alone: north data zeroed; north alone: east zeroed.
    std::vector<TimedPoint> east_only = pts, north_only = pts;
    for (auto& q : east_only) q.p.north = 0.0;
    for (auto& q : north_only) q.p.east = 0.0;
    const PolyFit e = fit_constrained(east_only, ft, 2, {}, {{3.0, 0.0}, c.tolerance});
    const PolyFit n = fit_constrained(north_only, ft, 2, {}, {{0.0, -4.0}, c.tolerance});
    REQUIRE(testing_support::max_abs(joint.coeffs.row(0) - e.coeffs.row(0)) < 1e-10);
    REQUIRE(testing_support::max_abs(joint.coeffs.row(1) - n.coeffs.row(1)) < 1e-10);
  }
}
