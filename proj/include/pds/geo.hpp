#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

namespace pds {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// WGS84 geodetic coordinate in degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  bool valid() const noexcept {
    return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
           lon >= -180.0 && lon <= 180.0;
  }
};

/// Local east/north offset in meters. All detection math runs in this frame.
struct EnuPoint {
  double east = 0.0;
  double north = 0.0;

  Vec2 vec() const { return {east, north}; }
  static EnuPoint from(const Vec2& v) { return {v.x(), v.y()}; }

  EnuPoint operator+(const EnuPoint& o) const { return {east + o.east, north + o.north}; }
  EnuPoint operator-(const EnuPoint& o) const { return {east - o.east, north - o.north}; }
  EnuPoint operator*(double s) const { return {east * s, north * s}; }
  bool operator==(const EnuPoint&) const = default;

  double norm() const { return std::hypot(east, north); }
  bool finite() const { return std::isfinite(east) && std::isfinite(north); }
};

inline double distance(const EnuPoint& a, const EnuPoint& b) { return (a - b).norm(); }

/// Roll, pitch, yaw in radians between the right-forward-up body frame and
/// the local level frame.
struct Attitude {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

Attitude normalized(const Attitude& att);

/// On-board sensor sample. `v` and `a` are in the right-forward-up body frame.
/// Streams without a speed sensor (or without an accelerometer) clear the
/// corresponding flag; consumers must not read the vector in that case.
struct MotionSample {
  double t = 0.0;
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Attitude att;
  bool has_velocity = true;
  bool has_acceleration = true;
};

/// Tangent-plane projection about `origin` using the ellipsoid's meridional
/// and prime-vertical radii of curvature at the origin latitude.
/// Throws InvalidInput for out-of-range coordinates.
EnuPoint wgs84_to_enu(const GeoPoint& p, const GeoPoint& origin);
GeoPoint enu_to_wgs84(const EnuPoint& p, const GeoPoint& origin);

/// R = R_yaw * R_pitch * R_roll; maps body (right, forward, up) into the
/// level (east, north, up) frame.
Mat3 rotation_matrix(const Attitude& att);

struct PropagatedState {
  EnuPoint position;
  Vec3 velocity;  // level frame
};

/// One dead-reckoning step: p + R v dt + 1/2 R a dt^2 (east/north part) and
/// velocity R (v + a dt). Throws InvalidInput when dt <= 0.
PropagatedState propagate_state(const EnuPoint& p, const MotionSample& m, double dt);

/// Block matrices of the same step in state-space form, with the state
/// ordered (position xyz, velocity xyz). Position is 3-D here; the 2-D
/// propagation keeps only the first two rows.
Eigen::Matrix<double, 6, 6> transition_matrix(const Attitude& att, double dt);
Eigen::Matrix<double, 6, 3> control_matrix(const Attitude& att, double dt);

}  // namespace pds
