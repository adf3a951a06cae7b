#include "pds/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pds/error.hpp"

namespace pds {

std::vector<double> temporal_weights(std::span<const double> times, double now,
                                     const KernelSpec& kernel) {
  std::vector<double> w(times.size());
  double total = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    w[i] = kernel(now - times[i]);
    total += w[i];
  }
  if (!(total > 0.0)) throw InsufficientData("temporal kernel has no mass on the window");
  for (double& x : w) x /= total;
  return w;
}

SourceGaussian temporal_fuse(std::span<const GaussianInterval> intervals,
                             std::span<const double> weights) {
  if (intervals.empty()) throw InsufficientData("empty interval window");
  if (weights.size() != intervals.size()) throw InvalidInput("weight/interval count mismatch");
  Vec2 mean = Vec2::Zero();
  Vec2 var = Vec2::Zero();
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const double k = weights[i];
    if (k < 0.0) throw InvalidInput("negative temporal weight");
    mean += k * intervals[i].mean.vec();
    var += k * k * intervals[i].variance;
  }
  return {intervals.front().source, EnuPoint::from(mean), var.cwiseSqrt()};
}

FusedGaussian categorical_fuse(std::span<const SourceGaussian> zs) {
  if (zs.empty()) throw InvalidInput("categorical fusion needs at least one source");
  FusedGaussian f;
  f.sources = static_cast<int>(zs.size());
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  for (int axis = 0; axis < 2; ++axis) {
    double precision = 0.0, weighted = 0.0, log_sigma_sum = 0.0;
    for (const SourceGaussian& z : zs) {
      const double s = z.sigma(axis);
      if (!(s > 0.0) || !std::isfinite(s)) throw NumericalFailure("degenerate source variance");
      precision += 1.0 / (s * s);
      weighted += z.mean.vec()(axis) / (s * s);
      log_sigma_sum += std::log(s);
    }
    const double var = 1.0 / precision;
    const double mu = var * weighted;
    // sum mu_m^2/s_m^2 - mu^2/s^2 rewritten as a sum of squares to avoid
    // cancellation at large coordinates.
    double spread = 0.0;
    for (const SourceGaussian& z : zs) {
      const double d = z.mean.vec()(axis) - mu;
      spread += d * d / (z.sigma(axis) * z.sigma(axis));
    }
    const double m = static_cast<double>(zs.size()) - 1.0;
    f.sigma(axis) = std::sqrt(var);
    f.log_scale(axis) = -0.5 * m * log_two_pi + std::log(f.sigma(axis)) - log_sigma_sum - 0.5 * spread;
    if (axis == 0) f.mean.east = mu; else f.mean.north = mu;
  }
  return f;
}

double log_likelihood(const FusedGaussian& fused, const EnuPoint& weighted_gnss) {
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  const Vec2 g = weighted_gnss.vec();
  const Vec2 mu = fused.mean.vec();
  double ll = 0.0;
  for (int axis = 0; axis < 2; ++axis) {
    const double z = (g(axis) - mu(axis)) / fused.sigma(axis);
    ll += fused.log_scale(axis) - 0.5 * z * z - std::log(fused.sigma(axis)) - 0.5 * log_two_pi;
  }
  return ll;
}

double calibrate_threshold(std::span<const double> benign_lls, double pfp_max) {
  if (benign_lls.empty()) throw CalibrationError("empty calibration set");
  if (!(pfp_max >= 0.0 && pfp_max < 1.0)) throw InvalidInput("false-positive cap must be in [0, 1)");
  std::vector<double> sorted;
  sorted.reserve(benign_lls.size());
  for (double v : benign_lls)
    if (std::isfinite(v)) sorted.push_back(v);
  if (sorted.empty()) throw CalibrationError("no finite calibration samples");
  std::sort(sorted.begin(), sorted.end());

  const auto n = sorted.size();
  const auto allowed = static_cast<std::size_t>(std::floor(pfp_max * static_cast<double>(n) + 1e-9));
  // Step down past ties so that count(ll <= gamma) stays within the cap.
  std::size_t k = std::min(allowed, n);
  while (k > 0 && k < n && sorted[k - 1] == sorted[k]) --k;
  if (k == 0) return sorted.front() - 1.0;
  return sorted[k - 1];
}

AlarmRate pooled_alarm_rate(std::span<const long> alarms, std::span<const long> decided) {
  if (alarms.size() != decided.size()) throw InvalidInput("alarm and decision counts differ in length");
  double a = 0.0, n = 0.0;
  for (std::size_t i = 0; i < alarms.size(); ++i) {
    a += static_cast<double>(alarms[i]);
    n += static_cast<double>(decided[i]);
  }
  if (n == 0.0) return {};
  AlarmRate out{a / n, 0.0};
  const std::size_t k = alarms.size();
  if (k > 1) {
    double ss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double r = static_cast<double>(alarms[i]) - out.rate * static_cast<double>(decided[i]);
      ss += r * r;
    }
    out.se = std::sqrt(ss * static_cast<double>(k) / static_cast<double>(k - 1)) / n;
  }
  return out;
}

double calibrate_closed_loop(std::span<const double> benign_lls, double pfp_max,
                             const std::function<AlarmRate(double)>& fpr_at) {
  const double open_loop = calibrate_threshold(benign_lls, pfp_max);
  if (fpr_at(open_loop).rate <= pfp_max) return open_loop;

  std::vector<double> sorted;
  for (double v : benign_lls)
    if (std::isfinite(v)) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  // Candidate k flags the k smallest distinct scores; k = 0 flags nothing and
  // behaves exactly like the open loop with no alarms.
  auto gamma_at = [&](std::size_t k) { return k == 0 ? sorted.front() - 1.0 : sorted[k - 1]; };
  std::size_t lo = 0;
  std::size_t hi = static_cast<std::size_t>(
      std::upper_bound(sorted.begin(), sorted.end(), open_loop) - sorted.begin());
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const AlarmRate r = fpr_at(gamma_at(mid));
    if (r.rate + r.se <= pfp_max) lo = mid;
    else hi = mid;
  }
  return gamma_at(lo);
}

std::optional<EnuPoint> alternative_position(std::span<const SourceGaussian> sources) {
  if (sources.empty()) return std::nullopt;
  return categorical_fuse(sources).mean;
}

}  // namespace pds
