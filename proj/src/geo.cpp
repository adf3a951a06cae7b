#include "pds/geo.hpp"

#include <numbers>

#include "pds/error.hpp"

namespace pds {

namespace {

constexpr double kSemiMajor = 6378137.0;
constexpr double kFlattening = 1.0 / 298.257223563;
constexpr double kEcc2 = kFlattening * (2.0 - kFlattening);
constexpr double kDeg = std::numbers::pi / 180.0;

struct Radii {
  double meridional;
  double prime_vertical;
};

Radii radii_at(double lat_deg) {
  const double s = std::sin(lat_deg * kDeg);
  const double w = std::sqrt(1.0 - kEcc2 * s * s);
  return {kSemiMajor * (1.0 - kEcc2) / (w * w * w), kSemiMajor / w};
}

}  // namespace

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

Attitude normalized(const Attitude& att) {
  return {wrap_angle(att.roll), wrap_angle(att.pitch), wrap_angle(att.yaw)};
}

EnuPoint wgs84_to_enu(const GeoPoint& p, const GeoPoint& origin) {
  if (!p.valid() || !origin.valid()) throw InvalidInput("latitude/longitude out of range");
  const Radii r = radii_at(origin.lat);
  double dlon = p.lon - origin.lon;
  if (dlon > 180.0) dlon -= 360.0;
  if (dlon < -180.0) dlon += 360.0;
  return {r.prime_vertical * std::cos(origin.lat * kDeg) * dlon * kDeg,
          r.meridional * (p.lat - origin.lat) * kDeg};
}

GeoPoint enu_to_wgs84(const EnuPoint& p, const GeoPoint& origin) {
  if (!origin.valid()) throw InvalidInput("origin out of range");
  const Radii r = radii_at(origin.lat);
  GeoPoint g;
  g.lat = origin.lat + p.north / r.meridional / kDeg;
  g.lon = origin.lon + p.east / (r.prime_vertical * std::cos(origin.lat * kDeg)) / kDeg;
  if (g.lon > 180.0) g.lon -= 360.0;
  if (g.lon < -180.0) g.lon += 360.0;
  return g;
}

Mat3 rotation_matrix(const Attitude& att) {
  const double cr = std::cos(att.roll), sr = std::sin(att.roll);
  const double cp = std::cos(att.pitch), sp = std::sin(att.pitch);
  const double cy = std::cos(att.yaw), sy = std::sin(att.yaw);
  Mat3 yaw;
  yaw << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  Mat3 pitch;
  pitch << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
  Mat3 roll;
  roll << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  return yaw * pitch * roll;
}

PropagatedState propagate_state(const EnuPoint& p, const MotionSample& m, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("propagation step must be positive");
  const Mat3 r = rotation_matrix(m.att);
  const Vec3 v = m.has_velocity ? m.v : Vec3::Zero();
  const Vec3 a = m.has_acceleration ? m.a : Vec3::Zero();
  const Vec3 disp = r * v * dt + 0.5 * r * a * dt * dt;
  return {{p.east + disp.x(), p.north + disp.y()}, r * (v + a * dt)};
}

Eigen::Matrix<double, 6, 6> transition_matrix(const Attitude& att, double dt) {
  const Mat3 r = rotation_matrix(att);
  Eigen::Matrix<double, 6, 6> f = Eigen::Matrix<double, 6, 6>::Zero();
  f.topLeftCorner<3, 3>() = Mat3::Identity();
  f.topRightCorner<3, 3>() = r * dt;
  // Velocity enters in the body frame and leaves in the level frame.
  f.bottomRightCorner<3, 3>() = r;
  return f;
}

Eigen::Matrix<double, 6, 3> control_matrix(const Attitude& att, double dt) {
  const Mat3 r = rotation_matrix(att);
  Eigen::Matrix<double, 6, 3> b;
  b.topRows<3>() = r * (dt * dt / 2.0);
  b.bottomRows<3>() = r * dt;
  return b;
}

}  // namespace pds
