#pragma once

// Reference implementations used only by tests. They are written from the
// definitions, not from the library code, and favour clarity over speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "biopsym/anatomy.hpp"
#include "biopsym/volume.hpp"

namespace oracle {

using biopsym::Vec3;

/// Trilinear interpolation as a weighted sum over the 8 surrounding voxel
/// centers. Outside the voxel-center hull the value is 0.
inline double trilinear(const biopsym::UsVolume& vol, const Vec3& p) {
  const auto& d = vol.dims();
  std::array<double, 3> f{};
  std::array<int, 3> base{};
  for (int a = 0; a < 3; ++a) {
    f[a] = (p[a] - vol.origin()[a]) / vol.spacing()[a];
    if (!(f[a] >= 0.0 && f[a] <= d[a] - 1)) return 0.0;
    base[a] = std::min(static_cast<int>(std::floor(f[a])), d[a] - 2);
  }
  double sum = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::array<int, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      const int bit = (corner >> a) & 1;
      const double t = f[a] - base[a];
      w *= bit ? t : 1.0 - t;
      idx[a] = base[a] + bit;
    }
    sum += w * vol.at(idx[0], idx[1], idx[2]);
  }
  return sum;
}

/// Zone containing p, found by testing p against each of the 12 cells'
/// per-axis intervals. A cell's interval is [k L/n, (k+1) L/n) in the role
/// coordinate, closed at L for the last cell.
inline std::optional<int> zone_by_intervals(const biopsym::Aabb& box, const biopsym::AxisAssignment& axes,
                                            const Vec3& p) {
  auto in_cell = [&](const biopsym::AxisRole& role, int cells, int k) {
    const double lo = box.min[role.axis], hi = box.max[role.axis];
    const double length = hi - lo;
    const double s = role.reversed ? hi - p[role.axis] : p[role.axis] - lo;
    const double a = k * length / cells;
    const double b = (k + 1) * length / cells;
    if (k + 1 == cells) return s >= a && s <= length;
    return s >= a && s < b;
  };
  std::optional<int> found;
  int matches = 0;
  for (int cc = 0; cc < 3; ++cc) {
    for (int side = 0; side < 2; ++side) {
      for (int ml = 0; ml < 2; ++ml) {
        if (in_cell(axes.cranio_caudal, 3, cc) && in_cell(axes.side, 2, side) && in_cell(axes.medial_lateral, 2, ml)) {
          found = cc * 4 + side * 2 + ml;
          ++matches;
        }
      }
    }
  }
  if (matches > 1) return -1;  // overlapping cells: flags a broken partition
  return found;
}

/// Distance from p to a segment by dense sampling plus both endpoints.
inline double segment_distance_sampled(const biopsym::Segment& seg, const Vec3& p, int n = 20000) {
  double best = std::min((p - seg.p0).norm(), (p - seg.p1).norm());
  for (int k = 0; k <= n; ++k) best = std::min(best, (p - seg.at(static_cast<double>(k) / n)).norm());
  return best;
}

/// Length of a segment inside an ellipsoid, from the quadratic in t.
inline double ellipsoid_chord(const biopsym::Ellipsoid& e, const biopsym::Segment& seg) {
  const Vec3 inv = e.semi_axes.cwiseInverse();
  const Vec3 o = (seg.p0 - e.center).cwiseProduct(inv);
  const Vec3 d = (seg.p1 - seg.p0).cwiseProduct(inv);
  const double a = d.squaredNorm(), b = 2 * o.dot(d), c = o.squaredNorm() - 1;
  const double disc = b * b - 4 * a * c;
  if (a == 0.0 || disc <= 0.0) return 0.0;
  const double r = std::sqrt(disc);
  const double t0 = std::clamp((-b - r) / (2 * a), 0.0, 1.0);
  const double t1 = std::clamp((-b + r) / (2 * a), 0.0, 1.0);
  return (t1 - t0) * seg.length();
}

/// Ellipsoid volume by midpoint-rule integration of the cross-section areas.
inline double ellipsoid_volume_numeric(const Vec3& semi, int slices = 20000) {
  double v = 0.0;
  const double h = 2 * semi.z() / slices;
  for (int k = 0; k < slices; ++k) {
    const double z = -semi.z() + (k + 0.5) * h;
    const double s = 1 - (z / semi.z()) * (z / semi.z());
    v += std::numbers::pi * semi.x() * semi.y() * s * h;
  }
  return v;
}

}  // namespace oracle
