#include "pds/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "pds/error.hpp"

namespace pds {

namespace {

constexpr double kMaxSpeed = 25.0;

enum Stream : std::uint64_t { kGnss = 1, kWifi = 2, kCell = 3, kWaypoint = 4, kImu = 5 };

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace

const char* to_string(Source s) {
  switch (s) {
    case Source::Gnss: return "GNSS";
    case Source::Wifi: return "WIFI";
    case Source::Cellular: return "CELLULAR";
    case Source::Truth: return "TRUTH";
  }
  return "?";
}

Source source_from_string(const std::string& s) {
  if (s == "GNSS") return Source::Gnss;
  if (s == "WIFI") return Source::Wifi;
  if (s == "CELLULAR") return Source::Cellular;
  if (s == "TRUTH") return Source::Truth;
  throw InvalidInput("unknown source '" + s + "'");
}

const char* to_string(TraceShape s) {
  switch (s) {
    case TraceShape::Straight: return "straight";
    case TraceShape::Arc: return "arc";
    case TraceShape::RandomWaypoint: return "random_waypoint";
  }
  return "?";
}

TraceShape shape_from_string(const std::string& s) {
  if (s == "straight") return TraceShape::Straight;
  if (s == "arc") return TraceShape::Arc;
  if (s == "random_waypoint") return TraceShape::RandomWaypoint;
  throw InvalidInput("unknown trace shape '" + s + "'");
}

void TraceConfig::validate() const {
  if (!(duration > 0.0)) throw ConfigError("trace.duration must be positive");
  if (!(gnss_rate > 0.0) || !(imu_rate > 0.0)) throw ConfigError("sample rates must be positive");
  const double ratio = imu_rate / gnss_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0)
    throw ConfigError("imu_rate must be an integer multiple of gnss_rate");
  if (gnss_noise_var < 0.0 || wifi_noise_var < 0.0 || cell_noise_var < 0.0)
    throw ConfigError("noise variances must be non-negative");
  if (!(unavailability >= 0.0 && unavailability < 1.0))
    throw ConfigError("unavailability must be in [0, 1)");
  if (anchor_count < 3) throw ConfigError("at least three anchors are required");
  if (!(anchor_offset > 0.0)) throw ConfigError("anchor_offset must be positive");
  if (!(anchor_jitter >= 0.0 && anchor_jitter < 1.0)) throw ConfigError("anchor_jitter must be in [0, 1)");
  if (!(speed >= 0.0 && speed <= kMaxSpeed)) throw ConfigError("speed must be within [0, 25] m/s");
}

TruthTrace generate_truth_trace(const TraceConfig& cfg, TraceShape shape) {
  cfg.validate();
  const double dt = 1.0 / cfg.imu_rate;
  const auto per_epoch = static_cast<long>(std::lround(cfg.imu_rate / cfg.gnss_rate));
  const auto steps = static_cast<long>(std::floor(cfg.duration * cfg.imu_rate + 1e-9));

  std::mt19937_64 rng = make_rng(cfg.rng_seed, kWaypoint);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double heading = 2.0 * std::numbers::pi * unit(rng) - std::numbers::pi;
  double speed = cfg.speed;
  EnuPoint pos{0.0, 0.0};

  // Random-waypoint state.
  EnuPoint waypoint;
  double target_speed = speed;
  auto next_waypoint = [&]() {
    const double r = 150.0 + 350.0 * unit(rng);
    const double bearing = 2.0 * std::numbers::pi * unit(rng);
    waypoint = {pos.east + r * std::cos(bearing), pos.north + r * std::sin(bearing)};
    target_speed = 5.0 + 15.0 * unit(rng);
  };
  if (shape == TraceShape::RandomWaypoint) {
    speed = 5.0 + 10.0 * unit(rng);
    next_waypoint();
  }

  TruthTrace out;
  out.motion.reserve(static_cast<std::size_t>(steps + 1));
  out.positions.reserve(static_cast<std::size_t>(steps / per_epoch + 1));

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    double yaw_rate = 0.0;
    double accel = 0.0;
    switch (shape) {
      case TraceShape::Straight:
        break;
      case TraceShape::Arc:
        yaw_rate = cfg.yaw_rate;
        break;
      case TraceShape::RandomWaypoint: {
        const EnuPoint to = waypoint - pos;
        if (to.norm() < 20.0) next_waypoint();
        const EnuPoint dir = waypoint - pos;
        // Heading measured from north towards west (yaw convention).
        const double desired = std::atan2(-dir.east, dir.north);
        const double err = wrap_angle(desired - heading);
        yaw_rate = std::clamp(0.5 * err, -0.3, 0.3);
        accel = std::clamp(0.5 * (target_speed - speed), -2.0, 2.0);
        break;
      }
    }

    MotionSample m;
    m.t = t;
    m.v = Vec3(0.0, speed, 0.0);
    // Centripetal term points left (negative right axis) for positive yaw rate.
    m.a = Vec3(-speed * yaw_rate, accel, 0.0);
    m.att = Attitude{0.0, 0.0, wrap_angle(heading)};
    out.motion.push_back(m);
    if (k % per_epoch == 0) out.positions.push_back({t, Source::Truth, pos, true});

    pos = propagate_state(pos, m, dt).position;
    heading += yaw_rate * dt;
    speed = std::clamp(speed + accel * dt, 0.0, kMaxSpeed);
  }
  return out;
}

std::vector<PositionSample> synth_gnss(std::span<const PositionSample> truth,
                                       const TraceConfig& cfg) {
  std::mt19937_64 rng = make_rng(cfg.rng_seed, kGnss);
  std::normal_distribution<double> noise(0.0, std::sqrt(cfg.gnss_noise_var));
  std::vector<PositionSample> out;
  out.reserve(truth.size());
  for (const PositionSample& s : truth) {
    const double de = noise(rng);
    const double dn = noise(rng);
    out.push_back({s.t, Source::Gnss, {s.p.east + de, s.p.north + dn}, true});
  }
  return out;
}

double received_power_dbm(const Anchor& a, const EnuPoint& receiver) {
  const double d = std::max(distance(a.p, receiver), 1.0);
  return a.tx_power - 10.0 * a.path_loss_exponent * std::log10(d);
}

EnuPoint weighted_centroid(std::span<const Anchor> anchors, const EnuPoint& receiver) {
  if (anchors.size() < 3) throw ConfigError("weighted centroid needs at least three anchors");
  // Weights relative to the strongest anchor keep the sum representable.
  double max_rss = -std::numeric_limits<double>::infinity();
  std::vector<double> rss(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    rss[i] = received_power_dbm(anchors[i], receiver);
    max_rss = std::max(max_rss, rss[i]);
  }
  Vec2 acc = Vec2::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double w = std::pow(10.0, (rss[i] - max_rss) / 10.0);
    acc += w * anchors[i].p.vec();
    total += w;
  }
  return EnuPoint::from(acc / total);
}

std::vector<Anchor> place_anchors_around(const EnuPoint& center, AnchorKind kind,
                                         const TraceConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double rotation = 2.0 * std::numbers::pi * unit(rng);
  std::vector<Anchor> anchors;
  anchors.reserve(static_cast<std::size_t>(cfg.anchor_count));
  for (int i = 0; i < cfg.anchor_count; ++i) {
    const double bearing = rotation + 2.0 * std::numbers::pi * i / cfg.anchor_count;
    const double r = cfg.anchor_offset * (1.0 + cfg.anchor_jitter * (2.0 * unit(rng) - 1.0));
    Anchor a;
    a.id = i;
    a.kind = kind;
    a.p = {center.east + r * std::cos(bearing), center.north + r * std::sin(bearing)};
    a.tx_power = kind == AnchorKind::AccessPoint ? cfg.wifi_tx_power : cfg.cell_tx_power;
    a.path_loss_exponent = cfg.path_loss_exponent;
    anchors.push_back(a);
  }
  return anchors;
}

namespace {

struct NetworkParams {
  double var;
  std::uint64_t stream;
  AnchorKind kind;
};

NetworkParams network_params(Source kind, const TraceConfig& cfg) {
  switch (kind) {
    case Source::Wifi: return {cfg.wifi_noise_var, kWifi, AnchorKind::AccessPoint};
    case Source::Cellular: return {cfg.cell_noise_var, kCell, AnchorKind::BaseStation};
    default: throw InvalidInput("network positions need a WIFI or CELLULAR source");
  }
}

template <typename AnchorsAt>
std::vector<PositionSample> synth_network(std::span<const PositionSample> truth, Source kind,
                                          const TraceConfig& cfg, AnchorsAt&& anchors_at) {
  const NetworkParams np = network_params(kind, cfg);
  std::mt19937_64 rng = make_rng(cfg.rng_seed, np.stream);
  std::normal_distribution<double> noise(0.0, std::sqrt(np.var));
  std::bernoulli_distribution drop(cfg.unavailability);
  std::vector<PositionSample> out;
  out.reserve(truth.size());
  for (const PositionSample& s : truth) {
    const std::vector<Anchor>& anchors = anchors_at(s.p, np.kind, rng);
    const EnuPoint est = weighted_centroid(anchors, s.p);
    const double de = noise(rng);
    const double dn = noise(rng);
    const bool lost = drop(rng);
    PositionSample o{s.t, kind, {est.east + de, est.north + dn}, !lost};
    if (lost) o.p = {};
    out.push_back(o);
  }
  return out;
}

}  // namespace

std::vector<PositionSample> synth_network_positions(std::span<const PositionSample> truth,
                                                    std::span<const Anchor> anchors,
                                                    Source kind, const TraceConfig& cfg) {
  if (anchors.size() < 3) throw ConfigError("network positioning needs at least three anchors");
  const std::vector<Anchor> fixed(anchors.begin(), anchors.end());
  return synth_network(truth, kind, cfg,
                       [&](const EnuPoint&, AnchorKind, std::mt19937_64&) -> const std::vector<Anchor>& {
                         return fixed;
                       });
}

std::vector<PositionSample> synth_network_positions(std::span<const PositionSample> truth,
                                                    Source kind, const TraceConfig& cfg) {
  cfg.validate();
  std::vector<Anchor> current;
  return synth_network(truth, kind, cfg,
                       [&](const EnuPoint& p, AnchorKind k, std::mt19937_64& rng) -> const std::vector<Anchor>& {
                         current = place_anchors_around(p, k, cfg, rng);
                         return current;
                       });
}

DriftConfig DriftConfig::none() {
  DriftConfig d;
  d.accel_noise_sd = d.accel_bias_sd = d.accel_bias_walk = 0.0;
  d.vel_noise_sd = d.vel_bias_sd = d.vel_bias_walk = 0.0;
  return d;
}

std::vector<MotionSample> synth_imu(std::span<const MotionSample> truth_motion,
                                    const DriftConfig& drift, std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed, kImu);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  auto draw3 = [&](double sd) {
    return Vec3(sd * std_normal(rng), sd * std_normal(rng), sd * std_normal(rng));
  };

  Vec3 accel_bias = drift.accel_bias_offset + draw3(drift.accel_bias_sd);
  Vec3 vel_bias = drift.vel_bias_offset + draw3(drift.vel_bias_sd);
  std::vector<MotionSample> out;
  out.reserve(truth_motion.size());
  double prev_t = truth_motion.empty() ? 0.0 : truth_motion.front().t;
  for (const MotionSample& m : truth_motion) {
    const double dt = m.t - prev_t;
    prev_t = m.t;
    if (dt > 0.0) {
      accel_bias += draw3(drift.accel_bias_walk * std::sqrt(dt));
      vel_bias += draw3(drift.vel_bias_walk * std::sqrt(dt));
    }
    MotionSample o = m;
    if (o.has_acceleration) o.a += accel_bias + draw3(drift.accel_noise_sd);
    if (o.has_velocity) o.v += vel_bias + draw3(drift.vel_noise_sd);
    out.push_back(o);
  }
  return out;
}

void AttackConfig::validate() const {
  if (!(onset >= 0.0)) throw ConfigError("attack onset must be non-negative");
  if (!(stage1_duration >= 0.0)) throw ConfigError("stage-1 duration must be non-negative");
  if (!(profile_offset >= 0.0)) throw ConfigError("profile offset must be non-negative");
  if (!(growth_rate > 1.0)) throw ConfigError("growth rate must exceed 1");
  if (!(max_deviation >= profile_offset)) throw ConfigError("max deviation below profile offset");
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw ConfigError("attack direction must be a unit vector");
}

double deviation_at(const AttackConfig& atk, double t) {
  if (t < atk.onset) return 0.0;
  const double stage2 = atk.onset + atk.stage1_duration;
  if (t < stage2) return atk.profile_offset;
  return std::min(atk.profile_offset * std::pow(atk.growth_rate, t - stage2), atk.max_deviation);
}

std::vector<PositionSample> apply_spoofing(std::span<const PositionSample> gnss,
                                           const AttackConfig& atk) {
  std::vector<PositionSample> out(gnss.begin(), gnss.end());
  for (PositionSample& s : out) {
    const double d = deviation_at(atk, s.t);
    if (d == 0.0) continue;
    s.p.east += d * atk.direction.x();
    s.p.north += d * atk.direction.y();
  }
  return out;
}

Vec2 lateral_direction(std::span<const MotionSample> truth_motion, double t) {
  if (truth_motion.empty()) return {1.0, 0.0};
  auto it = std::lower_bound(truth_motion.begin(), truth_motion.end(), t,
                             [](const MotionSample& m, double v) { return m.t < v; });
  if (it == truth_motion.end()) --it;
  const Vec3 right = rotation_matrix(it->att) * Vec3(1.0, 0.0, 0.0);
  Vec2 d(right.x(), right.y());
  return d.normalized();
}

std::vector<PositionSample> Trace::stream(Source s) const {
  std::vector<PositionSample> out;
  for (const PositionSample& p : positions)
    if (p.source == s) out.push_back(p);
  return out;
}

Scenario make_scenario(const TraceConfig& cfg, TraceShape shape, const DriftConfig& drift,
                       const std::optional<AttackConfig>& attack) {
  cfg.validate();
  TruthTrace truth = generate_truth_trace(cfg, shape);
  Scenario sc;
  sc.benign_gnss = synth_gnss(truth.positions, cfg);
  std::vector<PositionSample> gnss = sc.benign_gnss;
  if (attack) {
    AttackConfig atk = *attack;
    atk.direction = lateral_direction(truth.motion, atk.onset);
    atk.validate();
    gnss = apply_spoofing(sc.benign_gnss, atk);
    sc.attack = atk;
  }
  const auto wifi = synth_network_positions(truth.positions, Source::Wifi, cfg);
  const auto cell = synth_network_positions(truth.positions, Source::Cellular, cfg);

  Trace& tr = sc.trace;
  tr.positions.reserve(truth.positions.size() * 4);
  for (std::size_t i = 0; i < truth.positions.size(); ++i) {
    tr.positions.push_back(truth.positions[i]);
    tr.positions.push_back(gnss[i]);
    tr.positions.push_back(wifi[i]);
    tr.positions.push_back(cell[i]);
  }
  tr.motion = synth_imu(truth.motion, drift, cfg.rng_seed);
  return sc;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) throw ParseError("invalid number '" + s + "'", line);
  return v;
}

constexpr const char* kPositionsHeader = "t,src,east,north,avail";
constexpr const char* kMotionHeader = "t,vx,vy,vz,ax,ay,az,roll,pitch,yaw";

}  // namespace

void write_trace(const std::filesystem::path& dir, const Trace& trace) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "positions.csv", std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + (dir / "positions.csv").string());
    out << kPositionsHeader << '\n';
    for (const PositionSample& s : trace.positions) {
      out << fmt_double(s.t) << ',' << to_string(s.source) << ',' << fmt_double(s.p.east) << ','
          << fmt_double(s.p.north) << ',' << (s.available ? 1 : 0) << '\n';
    }
    if (!out) throw InvalidInput("write failed for positions.csv");
  }
  if (trace.motion.empty()) return;
  std::ofstream out(dir / "motion.csv", std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + (dir / "motion.csv").string());
  out << kMotionHeader << '\n';
  for (const MotionSample& m : trace.motion) {
    out << fmt_double(m.t);
    for (int i = 0; i < 3; ++i) out << ',' << (m.has_velocity ? fmt_double(m.v(i)) : "");
    for (int i = 0; i < 3; ++i) out << ',' << (m.has_acceleration ? fmt_double(m.a(i)) : "");
    out << ',' << fmt_double(m.att.roll) << ',' << fmt_double(m.att.pitch) << ','
        << fmt_double(m.att.yaw) << '\n';
  }
  if (!out) throw InvalidInput("write failed for motion.csv");
}

namespace {

std::vector<PositionSample> read_positions(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + file.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ValidationError("empty trace file " + file.string());
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPositionsHeader) throw ParseError("unexpected positions header", lineno);

  std::vector<PositionSample> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw ParseError("expected 5 fields", lineno);
    PositionSample s;
    s.t = parse_double(f[0], lineno);
    try {
      s.source = source_from_string(f[1]);
    } catch (const InvalidInput&) {
      throw ParseError("unknown source '" + f[1] + "'", lineno);
    }
    s.p.east = parse_double(f[2], lineno);
    s.p.north = parse_double(f[3], lineno);
    if (f[4] == "1") s.available = true;
    else if (f[4] == "0") s.available = false;
    else throw ParseError("availability must be 0 or 1", lineno);
    out.push_back(s);
  }
  if (out.empty()) throw ValidationError("trace has no position samples");

  std::map<Source, double> last;
  for (const PositionSample& s : out) {
    auto it = last.find(s.source);
    if (it != last.end() && !(s.t > it->second))
      throw ValidationError(std::string("non-monotonic timestamps in ") + to_string(s.source) + " stream");
    last[s.source] = s.t;
  }
  return out;
}

std::vector<MotionSample> read_motion(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + file.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) return {};
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMotionHeader) throw ParseError("unexpected motion header", lineno);

  std::vector<MotionSample> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw ParseError("expected 10 fields", lineno);
    MotionSample m;
    m.t = parse_double(f[0], lineno);
    auto triplet = [&](std::size_t first, Vec3& v) {
      const bool blank = f[first].empty() && f[first + 1].empty() && f[first + 2].empty();
      if (blank) return false;
      for (std::size_t i = 0; i < 3; ++i) v(static_cast<Eigen::Index>(i)) = parse_double(f[first + i], lineno);
      return true;
    };
    m.has_velocity = triplet(1, m.v);
    m.has_acceleration = triplet(4, m.a);
    m.att.roll = parse_double(f[7], lineno);
    m.att.pitch = parse_double(f[8], lineno);
    m.att.yaw = parse_double(f[9], lineno);
    if (!out.empty() && !(m.t > out.back().t))
      throw ValidationError("non-monotonic timestamps in motion stream");
    out.push_back(m);
  }
  return out;
}

}  // namespace

Trace load_trace(const std::filesystem::path& path) {
  std::filesystem::path positions = path;
  std::filesystem::path motion;
  if (std::filesystem::is_directory(path)) {
    positions = path / "positions.csv";
    motion = path / "motion.csv";
  } else {
    motion = path.parent_path() / "motion.csv";
  }
  Trace tr;
  tr.positions = read_positions(positions);
  if (std::filesystem::exists(motion)) tr.motion = read_motion(motion);
  return tr;
}

}  // namespace pds
