#include "biopsym/probe.hpp"

#include <algorithm>
#include <cmath>

#include "biopsym/error.hpp"

namespace biopsym {

void DevicePose::validate() const {
  if (!position.allFinite()) throw Error(Errc::invalid_argument, "device position must be finite");
  if (std::abs(orientation.norm() - 1.0) > 1e-9) {
    throw Error(Errc::invalid_argument, "device orientation must be a unit quaternion");
  }
}

void ProbeSpec::validate() const {
  if (!pivot.allFinite()) throw Error(Errc::invalid_argument, "probe pivot must be finite");
  if (!(d_max_mm > 0.0)) throw Error(Errc::invalid_argument, "probe d_max must be positive");
  if (!(tip_offset_mm >= 0.0)) throw Error(Errc::invalid_argument, "probe tip offset must be >= 0");
  if (!(std::abs(guide_angle_deg) < 90.0)) throw Error(Errc::invalid_argument, "|guide angle| must be < 90 deg");
  if (!std::isfinite(guide_offset_mm)) throw Error(Errc::invalid_argument, "guide offset must be finite");
  if (!(pitch_limit_deg > 0.0 && pitch_limit_deg < 90.0) || !(yaw_limit_deg > 0.0 && yaw_limit_deg < 90.0)) {
    throw Error(Errc::invalid_argument, "pitch/yaw limits must be in (0, 90) deg");
  }
}

Mat3 probe_rotation(double pitch, double yaw, double roll) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(-yaw, Vec3::UnitX()) * AngleAxisd(pitch, Vec3::UnitY()) * AngleAxisd(roll, Vec3::UnitZ()))
      .toRotationMatrix();
}

ProbePose constrain_pose(const ProbeSpec& spec, const DevicePose& dev) {
  const Quat q = dev.orientation.normalized();
  const Vec3 device_axis = q * Vec3::UnitZ();

  const double pitch_limit = deg_to_rad(spec.pitch_limit_deg);
  const double yaw_limit = deg_to_rad(spec.yaw_limit_deg);

  ProbePose pose;
  pose.pitch = std::clamp(std::asin(std::clamp(device_axis.x(), -1.0, 1.0)), -pitch_limit, pitch_limit);
  pose.yaw = std::clamp(std::atan2(device_axis.y(), device_axis.z()), -yaw_limit, yaw_limit);

  // Twist: device x axis expressed in the roll-free probe frame.
  const Mat3 swing = probe_rotation(pose.pitch, pose.yaw, 0.0);
  const Vec3 local_x = swing.transpose() * (q * Vec3::UnitX());
  pose.roll = wrap_angle(std::atan2(local_x.y(), local_x.x()));

  const double along = (dev.position - spec.pivot).dot(device_axis) - spec.tip_offset_mm;
  pose.depth_mm = std::clamp(along, 0.0, spec.d_max_mm);
  return pose;
}

DevicePose device_pose_of(const ProbeSpec& spec, const ProbePose& pose) {
  DevicePose dev;
  dev.position = probe_tip(spec, pose);
  dev.orientation = Quat(probe_rotation(pose.pitch, pose.yaw, pose.roll)).normalized();
  return dev;
}

void validate_pose(const ProbeSpec& spec, const ProbePose& pose) {
  constexpr double eps = 1e-12;
  if (!(pose.depth_mm >= 0.0 && pose.depth_mm <= spec.d_max_mm)) {
    throw Error(Errc::invalid_argument, "probe depth outside [0, d_max]");
  }
  if (!(std::abs(pose.pitch) <= deg_to_rad(spec.pitch_limit_deg) + eps) ||
      !(std::abs(pose.yaw) <= deg_to_rad(spec.yaw_limit_deg) + eps)) {
    throw Error(Errc::invalid_argument, "probe pitch/yaw outside limits");
  }
  if (!(pose.roll > -std::numbers::pi && pose.roll <= std::numbers::pi)) {
    throw Error(Errc::invalid_argument, "probe roll must be in (-pi, pi]");
  }
}

RigidTransform probe_frame(const ProbeSpec& spec, const ProbePose& pose) {
  return RigidTransform{probe_rotation(pose.pitch, pose.yaw, pose.roll), spec.pivot};
}

Vec3 probe_tip(const ProbeSpec& spec, const ProbePose& pose) {
  return probe_frame(spec, pose).apply(Vec3(0.0, 0.0, spec.tip_offset_mm + pose.depth_mm));
}

SlicePlane image_plane_of(const ProbeSpec& spec, const ProbePose& pose, double width_mm, double height_mm,
                          int px_w, int px_h) {
  const RigidTransform frame = probe_frame(spec, pose);
  const Vec3 axis = frame.rotation.col(2);
  SlicePlane plane;
  plane.center = probe_tip(spec, pose) + (height_mm / 2.0) * axis;
  plane.u_axis = frame.rotation.col(0);
  plane.v_axis = axis;
  plane.width_mm = width_mm;
  plane.height_mm = height_mm;
  plane.px_w = px_w;
  plane.px_h = px_h;
  return plane;
}

GuideLine guide_line_of(const ProbeSpec& spec, const ProbePose& pose) {
  const RigidTransform frame = probe_frame(spec, pose);
  const Vec3 axis = frame.rotation.col(2);
  const Vec3 lateral = frame.rotation.col(0);
  const double g = deg_to_rad(spec.guide_angle_deg);
  GuideLine line;
  line.origin = probe_tip(spec, pose) + spec.guide_offset_mm * axis;
  line.direction = (std::cos(g) * axis + std::sin(g) * lateral).normalized();
  return line;
}

}  // namespace biopsym
