#include <algorithm>
#include <array>
#include <cmath>

#include "biopsym/biopsy.hpp"

namespace biopsym {

namespace {

bool fires_single_zone(const ProbeSpec& probe, const NeedleSpec& needle, const ProstateModel& prostate,
                       const ProbePose& pose, double insertion, ZoneId zone, double min_inside_mm) {
  const BiopsySample s = fire_biopsy(needle, guide_line_of(probe, pose), insertion, prostate);
  if (s.out_of_gland || s.inside_mm < min_inside_mm) return false;
  ZoneSet want;
  want.set(static_cast<std::size_t>(zone.value()));
  return s.zones == want;
}

}  // namespace

std::optional<AimSolution> plan_zone_fire(const ProbeSpec& probe, const NeedleSpec& needle,
                                          const ProstateModel& prostate, ZoneId zone, double min_inside_mm) {
  const Aabb cell = prostate.zones.cell_bounds(zone);

  static constexpr std::array<double, 5> kCellFractions{0.5, 0.3, 0.7, 0.15, 0.85};
  std::vector<Vec3> aims;
  for (double fx : kCellFractions) {
    for (double fy : kCellFractions) {
      for (double fz : kCellFractions) {
        const Vec3 p = cell.min + cell.extent().cwiseProduct(Vec3(fx, fy, fz));
        if (point_in_mesh(prostate.mesh, p)) aims.push_back(p);
      }
    }
  }
  const Vec3 center = cell.min + 0.5 * cell.extent();
  std::stable_sort(aims.begin(), aims.end(), [&](const Vec3& a, const Vec3& b) {
    return (a - center).squaredNorm() < (b - center).squaredNorm();
  });

  static constexpr std::array<double, 5> kNotchFractions{0.5, 0.85, 0.97, 0.15, 0.03};
  static constexpr std::array<double, 4> kInsertions{5.0, 15.0, 0.0, 30.0};
  std::vector<double> rolls;
  for (int k = 0; k < 12; ++k) rolls.push_back(wrap_angle(k * std::numbers::pi / 6.0));

  for (const Vec3& aim : aims) {
    for (double frac : kNotchFractions) {
      for (double roll : rolls) {
        for (double hint : kInsertions) {
          const auto sol = aim_needle(probe, needle, aim, frac, roll, hint);
          if (!sol) continue;
          if (!fires_single_zone(probe, needle, prostate, sol->pose, sol->insertion_mm, zone, min_inside_mm)) continue;
          // The stream path re-derives the pose from a device pose.
          const ProbePose wire = constrain_pose(probe, device_pose_of(probe, sol->pose));
          if (!fires_single_zone(probe, needle, prostate, wire, sol->insertion_mm, zone, min_inside_mm)) continue;
          return AimSolution{wire, sol->insertion_mm};
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace biopsym
