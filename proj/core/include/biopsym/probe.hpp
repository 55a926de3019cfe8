#pragma once

#include "biopsym/geometry.hpp"
#include "biopsym/volume.hpp"

namespace biopsym {

/// Raw 6-DOF input (stylus tip position + orientation). The stylus axis is
/// the device-local +z direction.
struct DevicePose {
  Vec3 position{Vec3::Zero()};
  Quat orientation{Quat::Identity()};

  void validate() const;
};

struct ProbeSpec {
  Vec3 pivot{Vec3::Zero()};  // anal sphincter
  double d_max_mm = 60.0;
  double tip_offset_mm = 20.0;
  double guide_angle_deg = 5.0;
  double guide_offset_mm = 0.0;
  double pitch_limit_deg = 30.0;
  double yaw_limit_deg = 30.0;

  void validate() const;
};

/// Pivot-constrained probe configuration. Angles in radians.
///
/// Rotation convention: R = Rx(-yaw) * Ry(pitch) * Rz(roll). The probe axis
/// is R*z, so pitch tilts the axis towards +x and yaw towards +y; roll spins
/// the image plane (local x-z) about the axis.
struct ProbePose {
  double depth_mm = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  double roll = 0.0;

  friend bool operator==(const ProbePose&, const ProbePose&) = default;
};

struct GuideLine {
  Vec3 origin{Vec3::Zero()};
  Vec3 direction{Vec3::UnitZ()};

  Vec3 at(double s) const { return origin + s * direction; }
};

Mat3 probe_rotation(double pitch, double yaw, double roll);

/// Projects a free device pose onto the 4-DOF pivot kinematics. Never fails:
/// depth and angles clamp at the spec limits.
ProbePose constrain_pose(const ProbeSpec& spec, const DevicePose& dev);

/// Inverse of constrain_pose for feasible poses: stylus at the probe tip,
/// oriented like the probe frame.
DevicePose device_pose_of(const ProbeSpec& spec, const ProbePose& pose);

/// Throws Error{invalid_argument} when the pose is outside the spec limits.
void validate_pose(const ProbeSpec& spec, const ProbePose& pose);

/// Probe-to-world transform; the local origin is the pivot.
RigidTransform probe_frame(const ProbeSpec& spec, const ProbePose& pose);

Vec3 probe_tip(const ProbeSpec& spec, const ProbePose& pose);

/// Sagittal end-fire image plane: contains the probe axis, starts at the tip
/// and extends height_mm along the axis.
SlicePlane image_plane_of(const ProbeSpec& spec, const ProbePose& pose, double width_mm, double height_mm,
                          int px_w, int px_h);

GuideLine guide_line_of(const ProbeSpec& spec, const ProbePose& pose);

}  // namespace biopsym
