#include "pds/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pds/error.hpp"

namespace pds {

double CovarianceFn::correlated(double lag) const {
  const double u = lag / length_scale;
  return variance_scale * std::exp(-u * u);
}

double CovarianceFn::between_observations(double lag) const {
  if (lag == 0.0) return nugget;  // distinct samples at the same instant
  return nugget + variance_scale - correlated(lag);
}

double CovarianceFn::to_target(double lag) const {
  return nugget + variance_scale - correlated(lag);
}

KrigingSystem::KrigingSystem(std::span<const double> times, const CovarianceFn& cov)
    : times_(times.begin(), times.end()), cov_(cov) {
  if (times_.empty()) throw InvalidInput("kriging needs at least one observation time");
  if (!cov.valid()) throw InvalidInput("invalid covariance parameters");
  const auto n = static_cast<Eigen::Index>(times_.size());
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      sys(i, j) = cov_.between_observations(std::abs(times_[i] - times_[j]));
    }
    sys(i, n) = 1.0;
    sys(n, i) = 1.0;
  }
  lu_.compute(sys);
  const double rc = lu_.rcond();
  if (!(rc > 1e-13)) throw SingularSystem("kriging system is singular");
}

KrigingWeights KrigingSystem::weights(double t) const {
  const auto n = static_cast<Eigen::Index>(times_.size());
  Eigen::VectorXd rhs(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) rhs(i) = cov_.to_target(std::abs(t - times_[i]));
  rhs(n) = 1.0;
  const Eigen::VectorXd sol = lu_.solve(rhs);
  KrigingWeights w;
  w.lambda = sol.head(n);
  w.lagrange = sol(n);
  const double var = w.lambda.dot(rhs.head(n)) + w.lagrange;
  // Independent target noise bounds the error variance from below.
  w.variance = std::max(var, cov_.nugget);
  return w;
}

KrigingWeights kriging_weights(std::span<const double> times, double t, const CovarianceFn& cov) {
  return KrigingSystem(times, cov).weights(t);
}

ResidualPrediction predict_residual(std::span<const Residual> residuals, double t,
                                    const CovarianceFn& cov) {
  if (residuals.empty()) throw InvalidInput("empty residual window");
  std::vector<double> times;
  times.reserve(residuals.size());
  for (const Residual& r : residuals) times.push_back(r.t);
  const KrigingWeights w = kriging_weights(times, t, cov);
  ResidualPrediction out;
  for (std::size_t i = 0; i < residuals.size(); ++i)
    out.value += w.lambda(static_cast<Eigen::Index>(i)) * residuals[i].x;
  out.variance = w.variance;
  return out;
}

GaussianInterval build_interval(const PolyFit& fit, std::span<const Residual> residuals, double t,
                                const CovarianceFn& cov, int source) {
  const ResidualPrediction r = predict_residual(residuals, t, cov);
  GaussianInterval gi;
  gi.t = t;
  gi.source = source;
  gi.mean = fit.predict(t) - EnuPoint::from(r.value);
  gi.variance = Vec2::Constant(r.variance);
  return gi;
}

namespace {

struct LagBin {
  double lag_sum = 0.0;
  double gamma_sum = 0.0;
  double pairs = 0.0;
};

struct ModelFit {
  double nugget = 0.0;
  double sill = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

// Non-negative weighted least squares for gamma(h) = nugget + sill * g(h).
ModelFit fit_two_params(const std::vector<double>& lag, const std::vector<double>& gamma,
                        const std::vector<double>& weight, double length_scale) {
  double s_w = 0, s_g = 0, s_gg = 0, s_y = 0, s_gy = 0;
  std::vector<double> g(lag.size());
  for (std::size_t i = 0; i < lag.size(); ++i) {
    const double u = lag[i] / length_scale;
    g[i] = 1.0 - std::exp(-u * u);
    s_w += weight[i];
    s_g += weight[i] * g[i];
    s_gg += weight[i] * g[i] * g[i];
    s_y += weight[i] * gamma[i];
    s_gy += weight[i] * g[i] * gamma[i];
  }
  auto sse = [&](double nug, double sill) {
    double e = 0.0;
    for (std::size_t i = 0; i < lag.size(); ++i) {
      const double r = gamma[i] - nug - sill * g[i];
      e += weight[i] * r * r;
    }
    return e;
  };

  ModelFit best;
  auto consider = [&](double nug, double sill) {
    if (nug < 0.0 || sill < 0.0) return;
    const double e = sse(nug, sill);
    if (e < best.sse) best = {nug, sill, e};
  };

  const double det = s_w * s_gg - s_g * s_g;
  if (std::abs(det) > 1e-12 * s_w * s_gg) {
    consider((s_gg * s_y - s_g * s_gy) / det, (s_w * s_gy - s_g * s_y) / det);
  }
  consider(s_y / s_w, 0.0);
  if (s_gg > 0.0) consider(0.0, s_gy / s_gg);
  return best;
}

}  // namespace

CovarianceFit fit_covariance(std::span<const std::vector<Residual>> series,
                             const CovarianceFn& fallback) {
  constexpr double kBinWidth = 1.0;
  constexpr std::size_t kMinResiduals = 30;

  std::size_t count = 0;
  for (const auto& s : series) count += s.size();
  if (count < kMinResiduals) return {fallback, false};

  std::vector<LagBin> bins;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        const double lag = std::abs(s[i].t - s[j].t);
        const auto b = static_cast<std::size_t>(std::lround(lag / kBinWidth));
        if (b == 0) continue;
        if (bins.size() <= b) bins.resize(b + 1);
        const Vec2 d = s[i].x - s[j].x;
        bins[b].lag_sum += lag;
        bins[b].gamma_sum += 0.25 * d.squaredNorm();  // half squared diff, averaged over axes
        bins[b].pairs += 1.0;
      }
    }
  }

  std::vector<double> lag, gamma, weight;
  double max_gamma = 0.0;
  for (const LagBin& b : bins) {
    if (b.pairs == 0.0) continue;
    lag.push_back(b.lag_sum / b.pairs);
    gamma.push_back(b.gamma_sum / b.pairs);
    weight.push_back(b.pairs);
    max_gamma = std::max(max_gamma, gamma.back());
  }
  if (lag.size() < 2 || max_gamma <= 1e-12) return {fallback, false};

  ModelFit best;
  double best_length = fallback.length_scale;
  constexpr int kGrid = 200;
  const double lo = std::log(0.5), hi = std::log(200.0);
  for (int k = 0; k < kGrid; ++k) {
    const double ell = std::exp(lo + (hi - lo) * k / (kGrid - 1));
    const ModelFit f = fit_two_params(lag, gamma, weight, ell);
    if (f.sse < best.sse) {
      best = f;
      best_length = ell;
    }
  }
  if (!std::isfinite(best.sse) || best.nugget + best.sill <= 1e-12) return {fallback, false};

  CovarianceFn cov;
  cov.length_scale = best_length;
  cov.variance_scale = best.sill;
  cov.nugget = std::max(best.nugget, 1e-6);
  return {cov, true};
}

}  // namespace pds
