#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace biopsym {

// World coordinates are millimetres throughout.
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

struct Segment {
  Vec3 p0{Vec3::Zero()};
  Vec3 p1{Vec3::Zero()};

  Vec3 at(double t) const { return p0 + t * (p1 - p0); }
  double length() const { return (p1 - p0).norm(); }
};

struct RigidTransform {
  Mat3 rotation{Mat3::Identity()};
  Vec3 translation{Vec3::Zero()};

  Vec3 apply(const Vec3& local) const { return rotation * local + translation; }
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace biopsym
