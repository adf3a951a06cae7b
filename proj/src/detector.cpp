#include "pds/detector.hpp"

#include <algorithm>
#include <cmath>

#include "pds/error.hpp"

namespace pds {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::NetworksOnly: return "NETWORKS_ONLY";
    case Mode::SensorsOnly: return "SENSORS_ONLY";
    case Mode::All: return "ALL";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "NETWORKS_ONLY") return Mode::NetworksOnly;
  if (s == "SENSORS_ONLY") return Mode::SensorsOnly;
  if (s == "ALL") return Mode::All;
  throw InvalidInput("unknown mode '" + s + "'");
}

void DetectorConfig::validate() const {
  if (!(window >= 1.0)) throw ConfigError("window must be at least one second");
  if (!(pfp_max >= 0.0 && pfp_max < 1.0)) throw ConfigError("pfp_max must be in [0, 1)");
  if (poly_order < 0 || poly_order > 6) throw ConfigError("polynomial order must be in [0, 6]");
  if (!(epsilon.minCoeff() >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (!(fit_kernel.bandwidth > 0.0) || !(temporal_kernel.bandwidth > 0.0))
    throw ConfigError("kernel bandwidths must be positive");
  for (const CovarianceFn& c : covariance)
    if (!c.valid()) throw ConfigError("invalid covariance defaults");
  if (readmit_after < 1) throw ConfigError("readmit_after must be at least 1");
  if (!(drift_rate >= 0.0)) throw ConfigError("drift_rate must be non-negative");
  if (!(stand_in_gate >= 0.0)) throw ConfigError("stand_in_gate must be non-negative");
  if (!(bias_time_constant >= 0.0)) throw ConfigError("bias_time_constant must be non-negative");
  if (!(align_tolerance > 0.0)) throw ConfigError("align tolerance must be positive");
  if (!(min_sigma > 0.0)) throw ConfigError("min_sigma must be positive");
  if (std::isnan(threshold)) throw ConfigError("threshold is NaN");
}

namespace {

int network_index(Source s) {
  switch (s) {
    case Source::Gnss: return 0;
    case Source::Wifi: return 1;
    case Source::Cellular: return 2;
    default: return -1;
  }
}

}  // namespace

std::vector<EpochData> align_epochs(const Trace& trace, double tolerance,
                                    std::vector<std::string>* warnings) {
  std::array<std::vector<PositionSample>, kSourceCount> streams;
  for (const PositionSample& s : trace.positions) {
    const int m = network_index(s.source);
    if (m >= 0) streams[static_cast<std::size_t>(m)].push_back(s);
  }
  for (auto& s : streams)
    std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  if (streams[0].empty()) throw ValidationError("trace has no GNSS samples");

  std::vector<EpochData> out;
  out.reserve(streams[0].size());
  std::array<std::size_t, kSourceCount> cursor{};
  std::size_t imu = 0;
  const auto& motion = trace.motion;
  double prev_t = -std::numeric_limits<double>::infinity();

  for (const PositionSample& g : streams[0]) {
    EpochData e;
    e.t = g.t;
    if (g.available) e.p[0] = g.p;
    for (int m = 1; m < kSourceCount; ++m) {
      const auto& s = streams[static_cast<std::size_t>(m)];
      std::size_t& c = cursor[static_cast<std::size_t>(m)];
      while (c + 1 < s.size() && std::abs(s[c + 1].t - g.t) <= std::abs(s[c].t - g.t)) ++c;
      if (s.empty()) continue;
      if (std::abs(s[c].t - g.t) > tolerance) {
        if (warnings) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "t=%.3f: no %s sample within %.2f s", g.t,
                        to_string(s[c].source), tolerance);
          warnings->emplace_back(buf);
        }
        continue;
      }
      if (s[c].available) e.p[static_cast<std::size_t>(m)] = s[c].p;
    }

    // IMU aggregate over (prev_t, t].
    Vec3 accel_sum = Vec3::Zero();
    int accel_n = 0;
    const MotionSample* latest = nullptr;
    const MotionSample* latest_v = nullptr;
    while (imu < motion.size() && motion[imu].t <= g.t) {
      const MotionSample& ms = motion[imu];
      if (ms.t > prev_t) {
        latest = &ms;
        if (ms.has_velocity) latest_v = &ms;
        if (ms.has_acceleration) {
          accel_sum += ms.a;
          ++accel_n;
        }
      }
      ++imu;
    }
    if (!latest && imu > 0 && g.t - motion[imu - 1].t <= tolerance) latest = &motion[imu - 1];
    if (latest) {
      MotionSample agg = *latest;
      agg.t = g.t;
      if (latest_v) agg.v = latest_v->v;
      agg.has_velocity = latest_v != nullptr || latest->has_velocity;
      if (accel_n > 0) {
        agg.a = accel_sum / accel_n;
        agg.has_acceleration = true;
      }
      e.motion = agg;
    }
    prev_t = g.t;
    out.push_back(e);
  }
  return out;
}

std::vector<EpochData> strip_motion(std::span<const EpochData> epochs) {
  std::vector<EpochData> out(epochs.begin(), epochs.end());
  for (EpochData& e : out) e.motion.reset();
  return out;
}

std::optional<MotionSample> interval_motion(const std::optional<MotionSample>& prev,
                                            const std::optional<MotionSample>& cur) {
  if (!prev || !cur) return std::nullopt;
  MotionSample m = *prev;
  if (cur->has_acceleration) {
    m.a = cur->a;
    m.has_acceleration = true;
  }
  return m;
}

void WindowBuffer::push(WindowEntry e) {
  if (!entries_.empty() && !(e.t > entries_.back().t))
    throw InvalidInput("window entries must have increasing timestamps");
  const double cutoff = e.t - capacity_;
  entries_.push_back(std::move(e));
  // Small slack keeps exactly `capacity` epochs at integer cadence.
  while (!entries_.empty() && entries_.front().t <= cutoff + 1e-9) entries_.pop_front();
}

Detector::Detector(DetectorConfig cfg) : cfg_(std::move(cfg)), window_(cfg_.window) {
  cfg_.validate();
}

void Detector::reset() {
  window_.clear();
  raw_gnss_.clear();
  last_ = {};
  last_residuals_ = {};
  quarantined_ = false;
  vel_bias_.reset();
  benign_streak_ = 0;
  epochs_ = 0;
  previous_ = Verdict{};
  have_previous_ = false;
}

void Detector::seed(std::span<const EpochData> epochs) {
  for (const EpochData& e : epochs) {
    window_.push({e.t, e.p, e.motion, std::nullopt});
    if (e.p[0]) raw_gnss_.emplace_back(e.t, *e.p[0]);
    while (!raw_gnss_.empty() && raw_gnss_.front().first <= e.t - cfg_.window + 1e-9)
      raw_gnss_.pop_front();
    ++epochs_;
  }
}

bool Detector::uses_source(int m) const {
  return cfg_.mode != Mode::SensorsOnly || m == 0;
}

std::optional<EnuPoint> Detector::anchor_for(int m, double t,
                                             const std::optional<MotionSample>& motion) const {
  if (cfg_.mode == Mode::NetworksOnly || window_.empty()) return std::nullopt;
  const WindowEntry& prev = window_.back();
  if (!prev.motion || !motion) return std::nullopt;

  MotionSample crossing = *interval_motion(prev.motion, motion);
  if (m == 0 && vel_bias_ && crossing.has_velocity) crossing.v.head<2>() -= *vel_bias_;
  std::optional<AnchorState> base;
  const auto& last = last_[static_cast<std::size_t>(m)];
  // Network sources in ALL mode start from the previous fused position: a
  // single network fix is metres off, the fused estimate much less so.
  if (cfg_.mode == Mode::All && m != 0 && have_previous_ && previous_.alt_available &&
      previous_.t == prev.t) {
    base = AnchorState{previous_.alt_position, crossing};
  } else if (last && last->t == prev.t) {
    base = AnchorState{last->mean, crossing};
  } else if (prev.p[static_cast<std::size_t>(m)]) {
    base = AnchorState{*prev.p[static_cast<std::size_t>(m)], crossing};
  }
  if (!base) return std::nullopt;
  return dead_reckon_anchor(base, t);
}

// Fits GNSS - dead reckoning over the window as an offset plus the integral
// of R b, where b is a constant horizontal speed bias in the body frame.
std::optional<Vec2> Detector::window_velocity_bias() const {
  const auto& es = window_.entries();
  if (static_cast<double>(es.size()) < cfg_.window) return std::nullopt;
  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Vector4d atb = Eigen::Vector4d::Zero();
  Vec2 dr = Vec2::Zero();
  Eigen::Matrix2d integral = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (!es[i].p[0] || !es[i].motion || !es[i].motion->has_velocity) return std::nullopt;
    if (i > 0) {
      const double dt = es[i].t - es[i - 1].t;
      const MotionSample crossing = *interval_motion(es[i - 1].motion, es[i].motion);
      dr = propagate_state(EnuPoint::from(dr), crossing, dt).position.vec();
      integral += rotation_matrix(crossing.att).topLeftCorner<2, 2>() * dt;
    }
    Eigen::Matrix<double, 2, 4> row;
    row << Eigen::Matrix2d::Identity(), -integral;
    ata += row.transpose() * row;
    atb += row.transpose() * (es[i].p[0]->vec() - dr);
  }
  const Eigen::LDLT<Eigen::Matrix4d> ldlt(ata);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-10) return std::nullopt;
  const Eigen::Vector4d x = ldlt.solve(atb);
  return Vec2(x.tail<2>());
}

std::vector<TimedPoint> Detector::source_points(int m) const {
  const auto mi = static_cast<std::size_t>(m);
  std::vector<TimedPoint> pts;
  for (const WindowEntry& e : window_.entries()) {
    if (e.p[mi]) pts.push_back({e.t, *e.p[mi]});
    else if (m == 0 && e.gnss_substitute) pts.push_back({e.t, *e.gnss_substitute});
  }
  return pts;
}

std::optional<Detector::SourceFit> Detector::fit_source(int m, std::span<const TimedPoint> pts, double t,
                                                        const std::optional<EnuPoint>& anchor,
                                                        double dt) const {
  if (pts.size() < static_cast<std::size_t>(cfg_.poly_order + 2)) return std::nullopt;
  try {
    SourceFit out{anchor ? fit_constrained(pts, t, cfg_.poly_order, cfg_.fit_kernel,
                                           MotionConstraint{*anchor, cfg_.epsilon * dt})
                         : fit_unconstrained(pts, t, cfg_.poly_order, cfg_.fit_kernel),
                  {}, std::nullopt};
    std::vector<double> times;
    out.residuals.reserve(pts.size());
    times.reserve(pts.size());
    for (const TimedPoint& p : pts) {
      out.residuals.push_back({p.t, (out.fit.predict(p.t) - p.p).vec()});
      times.push_back(p.t);
    }
    out.system.emplace(times, cfg_.covariance[static_cast<std::size_t>(m)]);
    return out;
  } catch (const DegenerateFit&) {
  } catch (const SingularSystem&) {
  } catch (const InsufficientData&) {
  }
  return std::nullopt;
}

GaussianInterval Detector::SourceFit::interval(int m, double tau) const {
  const KrigingWeights kw = system->weights(tau);
  Vec2 xhat = Vec2::Zero();
  for (std::size_t i = 0; i < residuals.size(); ++i)
    xhat += kw.lambda(static_cast<Eigen::Index>(i)) * residuals[i].x;
  GaussianInterval gi;
  gi.t = tau;
  gi.source = m;
  gi.mean = fit.predict(tau) - EnuPoint::from(xhat);
  gi.variance = Vec2::Constant(kw.variance);
  return gi;
}

std::optional<Detector::SourceResult> Detector::evaluate_source(
    int m, double t, std::span<const double> eval_times, std::span<const double> weights,
    const std::optional<EnuPoint>& anchor) {
  const auto mi = static_cast<std::size_t>(m);
  last_residuals_[mi].clear();

  const std::vector<TimedPoint> pts = source_points(m);
  if (pts.empty()) return std::nullopt;
  // A source whose newest sample is older than the previous epoch would be
  // extrapolated across the gap; it sits this epoch out.
  if (pts.back().t < window_.back().t) return std::nullopt;

  const double dt = t - window_.back().t;
  std::optional<SourceFit> sf = fit_source(m, pts, t, anchor, dt);
  if (!sf) return std::nullopt;
  std::vector<GaussianInterval> intervals;
  intervals.reserve(eval_times.size());
  for (double tau : eval_times) intervals.push_back(sf->interval(m, tau));
  SourceGaussian z = temporal_fuse(intervals, weights);
  z.source = m;
  z.sigma = z.sigma.cwiseMax(cfg_.min_sigma);
  last_residuals_[mi] = std::move(sf->residuals);
  return SourceResult{z, intervals.back(), anchor.has_value()};
}

std::optional<GaussianInterval> Detector::smoothed_interval(int m, double t,
                                                            const std::optional<EnuPoint>& anchor,
                                                            double dt) const {
  const std::vector<TimedPoint> pts = source_points(m);
  if (pts.empty() || pts.back().t != t) return std::nullopt;
  const std::optional<SourceFit> sf = fit_source(m, pts, t, anchor, dt);
  if (!sf) return std::nullopt;
  return sf->interval(m, t);
}

Verdict Detector::step(const EpochData& epoch) {
  if (!window_.empty() && !(epoch.t > window_.back().t))
    throw InvalidInput("epoch times must increase");
  const double t = epoch.t;

  Verdict v;
  v.t = t;
  v.threshold = cfg_.threshold;
  v.warmup = static_cast<double>(epochs_) < cfg_.window;

  if (epoch.p[0]) raw_gnss_.emplace_back(t, *epoch.p[0]);
  while (!raw_gnss_.empty() && raw_gnss_.front().first <= t - cfg_.window - 1.0 + 1e-9)
    raw_gnss_.pop_front();

  // Nothing reported: keep the previous decision and alternative, and let
  // the window see the epoch's motion only.
  if (std::none_of(epoch.p.begin(), epoch.p.end(), [](const auto& p) { return p.has_value(); })) {
    v.no_sources = true;
    v.log_likelihood = std::numeric_limits<double>::quiet_NaN();
    if (have_previous_) {
      v.is_attack = previous_.is_attack;
      v.alt_position = previous_.alt_position;
      v.alt_available = previous_.alt_available;
    }
    if (window_.empty() || t > window_.back().t) window_.push(WindowEntry{t, {}, epoch.motion, std::nullopt});
    ++epochs_;
    previous_ = v;
    have_previous_ = true;
    return v;
  }

  std::vector<double> eval_times;
  for (const WindowEntry& e : window_.entries()) eval_times.push_back(e.t);
  eval_times.push_back(t);
  const std::vector<double> weights = temporal_weights(eval_times, t, cfg_.temporal_kernel);

  // Kernel-weighted received GNSS over the same epochs.
  std::optional<EnuPoint> weighted_gnss;
  {
    Vec2 acc = Vec2::Zero();
    double mass = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < eval_times.size(); ++i) {
      while (j < raw_gnss_.size() && raw_gnss_[j].first < eval_times[i]) ++j;
      if (j < raw_gnss_.size() && raw_gnss_[j].first == eval_times[i]) {
        acc += weights[i] * raw_gnss_[j].second.vec();
        mass += weights[i];
      }
    }
    if (mass > 0.0) weighted_gnss = EnuPoint::from(acc / mass);
  }

  std::array<std::optional<EnuPoint>, kSourceCount> anchors{};
  for (int m = 0; m < kSourceCount; ++m)
    if (uses_source(m)) anchors[static_cast<std::size_t>(m)] = anchor_for(m, t, epoch.motion);
  const double dt = window_.empty() ? 0.0 : t - window_.back().t;

  std::vector<SourceGaussian> zs;
  std::array<std::optional<SourceResult>, kSourceCount> results;
  for (int m = 0; m < kSourceCount; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    if (!uses_source(m) || window_.empty()) continue;
    results[mi] = evaluate_source(m, t, eval_times, weights, anchors[mi]);
    if (const auto& r = results[mi]) {
      zs.push_back(r->z);
      v.per_source.push_back({m, r->z.mean, r->z.sigma, r->current.mean, r->current.variance.cwiseSqrt()});
    }
  }

  const std::optional<EnuPoint>& gnss_anchor = anchors[0];
  const bool decided = !zs.empty() && weighted_gnss.has_value();
  if (decided) {
    const FusedGaussian fused = categorical_fuse(zs);
    v.log_likelihood = log_likelihood(fused, *weighted_gnss);
    v.is_attack = !v.warmup && v.log_likelihood <= cfg_.threshold;
  } else {
    v.no_sources = true;
    v.log_likelihood = std::numeric_limits<double>::quiet_NaN();
    if (have_previous_) v.is_attack = previous_.is_attack;
  }

  // Quarantine with hysteresis.
  if (decided) {
    if (v.is_attack) {
      quarantined_ = true;
      benign_streak_ = 0;
    } else if (quarantined_ && ++benign_streak_ >= cfg_.readmit_after) {
      quarantined_ = false;
      benign_streak_ = 0;
    }
  }
  const bool exclude_gnss = quarantined_ || v.is_attack;
  WindowEntry entry{t, epoch.p, epoch.motion, std::nullopt};
  std::optional<EnuPoint> chain;
  if (exclude_gnss) {
    entry.p[0].reset();
    // With no other source, a dead-reckoned chain from the last GNSS-source
    // estimate bridges the quarantine. The chain slews toward the received
    // fix no faster than IMU drift; the window gets the fix clamped to within
    // the gate around it. Elsewhere the networks carry the decision
    // and GNSS sits out.
    if (gnss_anchor && cfg_.mode == Mode::SensorsOnly) {
      chain = *gnss_anchor;
      entry.gnss_substitute = chain;
      if (epoch.p[0]) {
        const Vec2 gap = epoch.p[0]->vec() - gnss_anchor->vec();
        const Vec2 slew = Vec2::Constant(cfg_.drift_rate * dt);
        const Vec2 tol = Vec2::Constant(cfg_.stand_in_gate);
        chain = EnuPoint::from(gnss_anchor->vec() + gap.cwiseMax(-slew).cwiseMin(slew));
        entry.gnss_substitute = EnuPoint::from(gnss_anchor->vec() + gap.cwiseMax(-tol).cwiseMin(tol));
      }
    }
  }
  window_.push(std::move(entry));
  if (cfg_.mode == Mode::SensorsOnly && cfg_.bias_time_constant > 0.0 && !exclude_gnss) {
    if (const auto b = window_velocity_bias()) {
      const double gain = std::min(1.0, dt / cfg_.bias_time_constant);
      vel_bias_ = vel_bias_ ? Vec2(*vel_bias_ + gain * (*b - *vel_bias_)) : *b;
    }
  }

  // Current-epoch estimates from the updated window: a source that reported
  // now is smoothed through its own fix, otherwise the prediction stands.
  std::array<std::optional<GaussianInterval>, kSourceCount> current{};
  for (int m = 0; m < kSourceCount; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    if (!uses_source(m)) continue;
    current[mi] = smoothed_interval(m, t, anchors[mi], dt);
    if (!current[mi] && results[mi]) current[mi] = results[mi]->current;
    if (current[mi]) last_[mi] = Estimate{t, current[mi]->mean, current[mi]->variance};
  }
  if (chain) {
    // Keep the chain free of fitted extrapolation.
    const Vec2 var = last_[0] ? last_[0]->variance : Vec2::Zero();
    last_[0] = Estimate{t, *chain, var};
  }

  std::vector<SourceGaussian> alt;
  for (int m = 0; m < kSourceCount; ++m) {
    const auto& c = current[static_cast<std::size_t>(m)];
    if (!c || (m == 0 && (v.is_attack || exclude_gnss))) continue;
    alt.push_back({m, c->mean, c->variance.cwiseSqrt().cwiseMax(cfg_.min_sigma)});
  }
  if (auto p = alternative_position(alt)) {
    v.alt_position = *p;
    v.alt_available = true;
  } else if (gnss_anchor) {
    v.alt_position = *gnss_anchor;
    v.alt_available = true;
  } else if (have_previous_ && previous_.alt_available) {
    v.alt_position = previous_.alt_position;
    v.alt_available = true;
  }

  ++epochs_;
  previous_ = v;
  have_previous_ = true;
  return v;
}

void check_streams(const DetectorConfig& cfg, std::span<const EpochData> epochs) {
  bool network = false, motion = false;
  for (const EpochData& e : epochs) {
    network = network || e.p[1].has_value() || e.p[2].has_value();
    motion = motion || e.motion.has_value();
  }
  switch (cfg.mode) {
    case Mode::NetworksOnly:
      if (!network) throw ConfigError("NETWORKS_ONLY mode needs Wi-Fi or cellular positions");
      break;
    case Mode::SensorsOnly:
      if (!motion) throw ConfigError("SENSORS_ONLY mode needs IMU motion data");
      break;
    case Mode::All:
      if (!network && !motion) throw ConfigError("ALL mode needs network positions or IMU data");
      break;
  }
}

std::vector<Verdict> run(std::span<const EpochData> epochs, const DetectorConfig& cfg) {
  check_streams(cfg, epochs);
  Detector det(cfg);
  std::vector<Verdict> out;
  out.reserve(epochs.size());
  for (const EpochData& e : epochs) out.push_back(det.step(e));
  return out;
}

Calibration calibrate(const DetectorConfig& cfg, std::span<const std::vector<EpochData>> benign) {
  cfg.validate();
  if (benign.empty()) throw CalibrationError("no calibration traces");
  const auto w = static_cast<std::size_t>(std::ceil(cfg.window));
  for (const auto& trace : benign) {
    if (trace.size() < w) throw CalibrationError("calibration trace shorter than the window");
    check_streams(cfg, trace);
  }

  DetectorConfig open = cfg;
  open.threshold = -std::numeric_limits<double>::infinity();

  // Residual series from non-overlapping full windows.
  std::array<std::vector<std::vector<Residual>>, kSourceCount> series;
  for (const auto& trace : benign) {
    Detector det(open);
    for (std::size_t i = 0; i < trace.size(); ++i) {
      det.step(trace[i]);
      if (i + 1 < w || (i + 1) % w != 0) continue;
      for (std::size_t m = 0; m < kSourceCount; ++m)
        if (!det.last_residuals()[m].empty()) series[m].push_back(det.last_residuals()[m]);
    }
  }
  Calibration cal;
  for (std::size_t m = 0; m < kSourceCount; ++m) {
    const CovarianceFit fit = fit_covariance(series[m], cfg.covariance[m]);
    cal.covariance[m] = fit.cov;
    cal.fitted[m] = fit.from_data;
  }

  open.covariance = cal.covariance;
  std::vector<double> lls;
  for (const auto& trace : benign) {
    Detector det(open);
    for (const EpochData& e : trace) {
      const Verdict v = det.step(e);
      if (!v.warmup && !v.no_sources && std::isfinite(v.log_likelihood)) lls.push_back(v.log_likelihood);
    }
  }
  if (lls.empty()) throw CalibrationError("calibration produced no decisions");
  cal.threshold = closed_loop_threshold(open, benign, lls, cfg.pfp_max);
  cal.scores = std::move(lls);
  return cal;
}

AlarmRate benign_alarm_rate(const DetectorConfig& cfg, std::span<const std::vector<EpochData>> benign) {
  std::vector<long> decided(benign.size(), 0), alarms(benign.size(), 0);
  for (std::size_t k = 0; k < benign.size(); ++k) {
    for (const Verdict& v : run(benign[k], cfg)) {
      if (v.warmup) continue;
      ++decided[k];
      if (v.is_attack) ++alarms[k];
    }
  }
  return pooled_alarm_rate(alarms, decided);
}

double closed_loop_threshold(const DetectorConfig& cfg, std::span<const std::vector<EpochData>> benign,
                             std::span<const double> scores, double pfp_max) {
  DetectorConfig probe = cfg;
  return calibrate_closed_loop(scores, pfp_max, [&](double gamma) {
    probe.threshold = gamma;
    return benign_alarm_rate(probe, benign);
  });
}

Detector init(const DetectorConfig& cfg, std::span<const EpochData> calibration_trace) {
  const std::vector<EpochData> trace(calibration_trace.begin(), calibration_trace.end());
  const Calibration cal = calibrate(cfg, std::span<const std::vector<EpochData>>(&trace, 1));
  Detector det(apply(cfg, cal));
  const auto w = static_cast<std::size_t>(std::ceil(cfg.window));
  det.seed(calibration_trace.subspan(calibration_trace.size() - w));
  return det;
}

}  // namespace pds
