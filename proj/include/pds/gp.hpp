#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "pds/geo.hpp"
#include "pds/regression.hpp"

namespace pds {

/// x = p_hat(t) - p(t) for one available sample of a source.
struct Residual {
  double t = 0.0;
  Vec2 x = Vec2::Zero();
};

/// Stationary temporal covariance of the residual process:
///   C(h) = variance_scale * exp(-(h / length_scale)^2) + nugget * [h == 0].
/// The nugget is observation noise: each sample, including the one being
/// predicted, carries its own independent draw.
struct CovarianceFn {
  double length_scale = 2.0;    // seconds
  double variance_scale = 1.0;  // m^2
  double nugget = 1e-6;         // m^2

  bool valid() const { return length_scale > 0.0 && variance_scale >= 0.0 && nugget >= 0.0; }

  /// Smooth part only (no nugget).
  double correlated(double lag) const;

  /// Semivariogram between two distinct observations; zero for the same
  /// observation.
  double between_observations(double lag) const;

  /// Semivariogram between an observation and a fresh prediction target
  /// `lag` seconds away. Carries the nugget even at lag zero.
  double to_target(double lag) const;
};

struct KrigingWeights {
  Eigen::VectorXd lambda;
  double lagrange = 0.0;
  double variance = 0.0;  // prediction error variance (per axis)
};

/// Factored ordinary-kriging saddle system [G 1; 1' 0] for a fixed set of
/// observation times, reusable across prediction targets.
class KrigingSystem {
 public:
  /// Throws InvalidInput on an empty time set or invalid covariance and
  /// SingularSystem when the system cannot be factored.
  KrigingSystem(std::span<const double> times, const CovarianceFn& cov);

  KrigingWeights weights(double t) const;
  std::size_t size() const { return times_.size(); }

 private:
  std::vector<double> times_;
  CovarianceFn cov_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

KrigingWeights kriging_weights(std::span<const double> times, double t, const CovarianceFn& cov);

struct ResidualPrediction {
  Vec2 value = Vec2::Zero();
  double variance = 0.0;
};

ResidualPrediction predict_residual(std::span<const Residual> residuals, double t,
                                    const CovarianceFn& cov);

enum class SourceId : int { Gnss = 0, Wifi = 1, Cellular = 2 };
constexpr int kSourceCount = 3;

/// Per-source Gaussian over position at one time with diagonal covariance.
struct GaussianInterval {
  double t = 0.0;
  int source = 0;
  EnuPoint mean;
  Vec2 variance = Vec2::Zero();  // per-axis sigma^2
};

/// Mean is the polynomial prediction corrected by the kriged residual
/// (p_hat - x_hat, the residual being p_hat - p); variance is the kriging
/// variance on both axes.
GaussianInterval build_interval(const PolyFit& fit, std::span<const Residual> residuals, double t,
                                const CovarianceFn& cov, int source = 0);

struct CovarianceFit {
  CovarianceFn cov;
  bool from_data = false;  // false: degenerate or short history, fallback returned
};

/// Fits the RBF-plus-nugget semivariogram to the empirical one of the given
/// residual series (pairs are only formed within a series), by weighted
/// least squares over 1-second lag bins. Needs at least 30 residuals.
CovarianceFit fit_covariance(std::span<const std::vector<Residual>> series,
                             const CovarianceFn& fallback);

}  // namespace pds
