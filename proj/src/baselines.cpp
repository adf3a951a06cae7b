#include "pds/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pds/error.hpp"

namespace pds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double gaussian_log_density_2d(const Vec2& d, double var) {
  return -std::log(2.0 * std::numbers::pi * var) - 0.5 * d.squaredNorm() / var;
}

Vec2 level(const Vec3& body, const Attitude& att) {
  const Vec3 l = rotation_matrix(att) * body;
  return {l.x(), l.y()};
}

}  // namespace

std::optional<EnuPoint> network_estimate(const EpochData& e, const SourceVariances& var) {
  Vec2 acc = Vec2::Zero();
  double precision = 0.0;
  for (std::size_t m = 1; m < kSourceCount; ++m) {
    if (!e.p[m]) continue;
    acc += e.p[m]->vec() / var[m];
    precision += 1.0 / var[m];
  }
  if (precision == 0.0) return std::nullopt;
  return EnuPoint::from(acc / precision);
}

std::optional<bool> wcl_distance_detect(const std::optional<EnuPoint>& y_est, const EnuPoint& gnss,
                                        double threshold) {
  if (!y_est) return std::nullopt;
  return distance(*y_est, gnss) > threshold;
}

EkfState ekf_init(const EnuPoint& p, double t, double position_var, double velocity_var) {
  EkfState s;
  s.x << p.east, p.north, 0.0, 0.0;
  s.cov.setZero();
  s.cov.diagonal() << position_var, position_var, velocity_var, velocity_var;
  s.t = t;
  return s;
}

namespace {

// Joseph-form update with a 2-row measurement. Returns false when the
// innovation covariance is singular (no information is fused).
bool joseph_update(EkfState& s, const Eigen::Matrix<double, 2, 4>& h, const Vec2& z, double var) {
  const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * var;
  const Eigen::Matrix2d innov_cov = h * s.cov * h.transpose() + r;
  if (!(innov_cov.determinant() > 1e-18)) return false;
  const Eigen::Matrix<double, 4, 2> gain = s.cov * h.transpose() * innov_cov.inverse();
  s.x += gain * (z - h * s.x);
  const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - gain * h;
  s.cov = ikh * s.cov * ikh.transpose() + gain * r * gain.transpose();
  return true;
}

void check_covariance(Eigen::Matrix4d& cov) {
  const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (!std::isfinite(asym) || asym > 1e-9 * scale) throw NumericalFailure("EKF covariance lost symmetry");
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9 * scale)
    throw NumericalFailure("EKF covariance is not positive semidefinite");
}

}  // namespace

EkfStep ekf_step(const EkfState& state, const std::optional<MotionSample>& imu,
                 const std::optional<PositionSample>& gnss, const EkfNoise& noise,
                 double nis_threshold) {
  EkfStep out;
  EkfState s = state;
  const double t_new = gnss ? gnss->t : (imu ? imu->t : state.t);
  const double dt = t_new - state.t;
  if (dt < 0.0) throw InvalidInput("EKF step goes back in time");

  if (dt > 0.0) {
    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f.topRightCorner<2, 2>() = Eigen::Matrix2d::Identity() * dt;
    Vec2 accel = Vec2::Zero();
    if (imu && imu->has_acceleration) accel = level(imu->a, imu->att);
    s.x = f * s.x;
    s.x.head<2>() += 0.5 * dt * dt * accel;
    s.x.tail<2>() += dt * accel;
    const double q = noise.accel_psd;
    Eigen::Matrix4d qm = Eigen::Matrix4d::Zero();
    qm.topLeftCorner<2, 2>() = Eigen::Matrix2d::Identity() * q * dt * dt * dt / 3.0;
    qm.topRightCorner<2, 2>() = Eigen::Matrix2d::Identity() * q * dt * dt / 2.0;
    qm.bottomLeftCorner<2, 2>() = qm.topRightCorner<2, 2>();
    qm.bottomRightCorner<2, 2>() = Eigen::Matrix2d::Identity() * q * dt;
    s.cov = f * s.cov * f.transpose() + qm;
    s.t = t_new;
  }

  if (imu && imu->has_velocity) {
    Eigen::Matrix<double, 2, 4> hv = Eigen::Matrix<double, 2, 4>::Zero();
    hv.rightCols<2>() = Eigen::Matrix2d::Identity();
    joseph_update(s, hv, level(imu->v, imu->att), noise.velocity_var);
  }

  if (gnss && gnss->available) {
    Eigen::Matrix<double, 2, 4> hp = Eigen::Matrix<double, 2, 4>::Zero();
    hp.leftCols<2>() = Eigen::Matrix2d::Identity();
    const Vec2 z = gnss->p.vec();
    out.innovation = z - s.x.head<2>();
    const Eigen::Matrix2d innov_cov =
        s.cov.topLeftCorner<2, 2>() + Eigen::Matrix2d::Identity() * noise.gnss_var;
    if (innov_cov.determinant() > 1e-18) {
      out.nis = out.innovation.dot(innov_cov.inverse() * out.innovation);
    } else {
      out.nis = out.innovation.squaredNorm() == 0.0 ? 0.0 : kInf;
    }
    out.detect = out.nis > nis_threshold;
    if (!out.detect) out.gnss_used = joseph_update(s, hp, z, noise.gnss_var);
  }

  check_covariance(s.cov);
  out.state = s;
  return out;
}

double ParticleSet::effective_size() const {
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

EnuPoint ParticleSet::mean() const {
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < particles.size(); ++i) acc += weights[i] * particles[i].vec();
  return EnuPoint::from(acc);
}

ParticleSet uniform_particles(const EnuPoint& center, double half_width, int count,
                              std::mt19937_64& rng, double t) {
  if (count <= 0) throw InvalidInput("particle count must be positive");
  std::uniform_real_distribution<double> u(-half_width, half_width);
  ParticleSet ps;
  ps.t = t;
  ps.particles.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) ps.particles.push_back({center.east + u(rng), center.north + u(rng)});
  ps.weights.assign(static_cast<std::size_t>(count), 1.0 / count);
  return ps;
}

ParticleSet gaussian_particles(const EnuPoint& mean, double sd, int count, std::mt19937_64& rng,
                               double t) {
  if (count <= 0) throw InvalidInput("particle count must be positive");
  std::normal_distribution<double> n(0.0, sd);
  ParticleSet ps;
  ps.t = t;
  ps.particles.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) ps.particles.push_back({mean.east + n(rng), mean.north + n(rng)});
  ps.weights.assign(static_cast<std::size_t>(count), 1.0 / count);
  return ps;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, double offset) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx(n);
  double cum = weights.empty() ? 0.0 : weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + offset) / static_cast<double>(n);
    while (u > cum && j + 1 < n) cum += weights[++j];
    idx[i] = j;
  }
  return idx;
}

PfStep pf_step(ParticleSet ps, const std::optional<PositionSample>& observation,
               const std::optional<MotionSample>& motion, const PfConfig& cfg,
               double distance_threshold, std::mt19937_64& rng) {
  if (ps.particles.empty()) throw InvalidInput("empty particle set");
  PfStep out;
  const double t_new = observation ? observation->t : (motion ? motion->t : ps.t);
  const double dt = t_new - ps.t;
  if (dt < 0.0) throw InvalidInput("particle filter step goes back in time");

  if (dt > 0.0) {
    Vec2 shift = Vec2::Zero();
    if (motion) {
      MotionSample m = *motion;
      if (!m.has_velocity) m.v = Vec3::Zero();
      shift = propagate_state(EnuPoint{}, m, dt).position.vec();
    }
    const double sd = cfg.diffusion_sd * std::sqrt(dt);
    std::normal_distribution<double> n(0.0, 1.0);
    for (EnuPoint& p : ps.particles) {
      p.east += shift.x() + (sd > 0.0 ? sd * n(rng) : 0.0);
      p.north += shift.y() + (sd > 0.0 ? sd * n(rng) : 0.0);
    }
    ps.t = t_new;
  }

  const EnuPoint predicted = ps.mean();
  if (observation && observation->available) {
    out.distance = distance(predicted, observation->p);
    out.detect = out.distance > distance_threshold;
    if (!out.detect) {
      double total = 0.0;
      for (std::size_t i = 0; i < ps.particles.size(); ++i) {
        const double d2 = (ps.particles[i] - observation->p).vec().squaredNorm();
        const double like = cfg.obs_var > 0.0 ? std::exp(-0.5 * d2 / cfg.obs_var) : (d2 == 0.0 ? 1.0 : 0.0);
        ps.weights[i] *= like;
        total += ps.weights[i];
      }
      if (!(total > 0.0) || !std::isfinite(total)) {
        ps = uniform_particles(observation->p, cfg.reinit_spread, static_cast<int>(ps.particles.size()),
                               rng, ps.t);
        out.reinitialized = true;
      } else {
        for (double& w : ps.weights) w /= total;
      }
    }
  }

  const double count = static_cast<double>(ps.particles.size());
  if (ps.effective_size() < 0.5 * count) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto idx = systematic_resample(ps.weights, u(rng));
    std::vector<EnuPoint> next;
    next.reserve(idx.size());
    for (std::size_t i : idx) next.push_back(ps.particles[i]);
    ps.particles = std::move(next);
    ps.weights.assign(ps.particles.size(), 1.0 / count);
  }

  out.estimate = ps.mean();
  out.set = std::move(ps);
  return out;
}

std::optional<bool> combined_metrics_detect(std::span<const double> metric_lls, double gamma) {
  if (metric_lls.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : metric_lls) sum += v;
  return sum <= gamma;
}

std::vector<double> combined_metrics(const EpochData& e, const EpochData* previous,
                                     const SourceVariances& var, double displacement_var) {
  std::vector<double> out;
  if (!e.p[0]) return out;
  for (std::size_t m = 1; m < kSourceCount; ++m) {
    if (!e.p[m]) continue;
    out.push_back(gaussian_log_density_2d((*e.p[0] - *e.p[m]).vec(), var[0] + var[m]));
  }
  if (previous && previous->p[0]) {
    if (const auto crossing = interval_motion(previous->motion, e.motion)) {
      const double dt = e.t - previous->t;
      const Vec2 expected = propagate_state(EnuPoint{}, *crossing, dt).position.vec();
      const Vec2 observed = (*e.p[0] - *previous->p[0]).vec();
      out.push_back(gaussian_log_density_2d(observed - expected, displacement_var));
    }
  }
  return out;
}

const char* to_string(Baseline b) {
  switch (b) {
    case Baseline::Wcl: return "WCL";
    case Baseline::Ekf: return "EKF";
    case Baseline::Pf: return "PF";
    case Baseline::Combined: return "COMBINED";
  }
  return "?";
}

Baseline baseline_from_string(const std::string& s) {
  if (s == "WCL") return Baseline::Wcl;
  if (s == "EKF") return Baseline::Ekf;
  if (s == "PF") return Baseline::Pf;
  if (s == "COMBINED") return Baseline::Combined;
  throw InvalidInput("unknown baseline '" + s + "'");
}

Mode natural_mode(Baseline b) {
  switch (b) {
    case Baseline::Wcl: return Mode::NetworksOnly;
    case Baseline::Ekf:
    case Baseline::Pf: return Mode::SensorsOnly;
    case Baseline::Combined: return Mode::All;
  }
  return Mode::All;
}

std::vector<Verdict> run_baseline(Baseline kind, std::span<const EpochData> epochs,
                                  const BaselineConfig& cfg, double threshold, std::uint64_t seed) {
  if ((kind == Baseline::Ekf || kind == Baseline::Pf) &&
      std::none_of(epochs.begin(), epochs.end(), [](const EpochData& e) { return e.motion.has_value(); }))
    throw ConfigError(std::string(to_string(kind)) + " baseline needs IMU motion data");

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u};
  std::mt19937_64 rng(seq);

  std::vector<Verdict> out;
  out.reserve(epochs.size());
  std::optional<EkfState> ekf;
  std::optional<ParticleSet> pf;
  const double t0 = epochs.empty() ? 0.0 : epochs.front().t;

  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const EpochData& e = epochs[i];
    const EpochData* prev = i > 0 ? &epochs[i - 1] : nullptr;
    Verdict v;
    v.t = e.t;
    v.threshold = threshold;
    v.warmup = e.t - t0 < cfg.warmup - 1e-9;
    const double gamma = v.warmup ? -kInf : threshold;

    std::optional<double> score;
    std::optional<EnuPoint> alt;
    std::optional<PositionSample> gnss;
    if (e.p[0]) gnss = PositionSample{e.t, Source::Gnss, *e.p[0], true};

    switch (kind) {
      case Baseline::Wcl: {
        alt = network_estimate(e, cfg.source_var);
        if (alt && gnss) score = -distance(*alt, gnss->p);
        break;
      }
      case Baseline::Combined: {
        alt = network_estimate(e, cfg.source_var);
        const auto metrics = combined_metrics(e, prev, cfg.source_var, cfg.displacement_var);
        if (!metrics.empty()) {
          double sum = 0.0;
          for (double x : metrics) sum += x;
          score = sum;
        }
        break;
      }
      case Baseline::Ekf: {
        if (!ekf) {
          if (gnss) ekf = ekf_init(gnss->p, e.t, cfg.ekf.gnss_var, 1.0);
        } else {
          const EkfStep st = ekf_step(*ekf, e.motion, gnss, cfg.ekf, -gamma);
          ekf = st.state;
          if (gnss) score = -st.nis;
        }
        if (ekf) alt = EnuPoint{ekf->x(0), ekf->x(1)};
        break;
      }
      case Baseline::Pf: {
        if (!pf) {
          if (gnss) pf = uniform_particles(gnss->p, 3.0 * std::sqrt(cfg.pf.obs_var), cfg.pf.particles, rng, e.t);
        } else {
          const auto crossing = interval_motion(prev->motion, e.motion);
          PfStep st = pf_step(std::move(*pf), gnss, crossing, cfg.pf, -gamma, rng);
          pf = std::move(st.set);
          if (gnss) score = -st.distance;
          alt = st.estimate;
        }
        if (pf && !alt) alt = pf->mean();
        break;
      }
    }

    if (score) {
      v.log_likelihood = *score;
      v.is_attack = !v.warmup && *score <= threshold;
    } else {
      v.no_sources = true;
      v.log_likelihood = std::numeric_limits<double>::quiet_NaN();
      if (!out.empty()) v.is_attack = out.back().is_attack;
    }
    if (alt) {
      v.alt_position = *alt;
      v.alt_available = true;
    }
    out.push_back(v);
  }
  return out;
}

std::vector<double> baseline_scores(Baseline kind, std::span<const EpochData> epochs,
                                    const BaselineConfig& cfg, std::uint64_t seed) {
  std::vector<double> scores;
  for (const Verdict& v : run_baseline(kind, epochs, cfg, -kInf, seed))
    if (!v.warmup && !v.no_sources && std::isfinite(v.log_likelihood)) scores.push_back(v.log_likelihood);
  return scores;
}

}  // namespace pds
