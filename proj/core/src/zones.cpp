#include <array>
#include <string>

#include "biopsym/anatomy.hpp"
#include "biopsym/error.hpp"

namespace biopsym {

ZoneId::ZoneId(int value) {
  if (value < 0 || value >= kCount) throw Error(Errc::invalid_argument, "zone id must be in [0, 11]");
  value_ = static_cast<std::uint8_t>(value);
}

std::string ZoneId::name() const {
  static constexpr std::array<const char*, 3> kCc{"base", "mid", "apex"};
  static constexpr std::array<const char*, 2> kSide{"right", "left"};
  static constexpr std::array<const char*, 2> kMl{"medial", "lateral"};
  return std::string(kSide[static_cast<int>(side())]) + ' ' + kCc[static_cast<int>(cc())] + ' ' +
         kMl[static_cast<int>(ml())];
}

std::vector<ZoneId> zones_in(const ZoneSet& set) {
  std::vector<ZoneId> out;
  for (int z = 0; z < ZoneId::kCount; ++z) {
    if (set.test(static_cast<std::size_t>(z))) out.emplace_back(z);
  }
  return out;
}

void AxisAssignment::validate() const {
  for (const AxisRole* r : {&cranio_caudal, &side, &medial_lateral}) {
    if (r->axis < 0 || r->axis > 2) throw Error(Errc::invalid_argument, "axis role must name axis 0, 1 or 2");
  }
  if (cranio_caudal.axis == side.axis || cranio_caudal.axis == medial_lateral.axis ||
      side.axis == medial_lateral.axis) {
    throw Error(Errc::invalid_argument, "zone axis roles must use three distinct axes");
  }
}

namespace {

struct RoleSplit {
  const AxisRole* role;
  int cells;
};

// Cell index along one role, or -1 when outside. Works in the role's own
// coordinate s in [0, L] so that reversal keeps the same ownership rule.
int cell_index(const Aabb& box, const AxisRole& role, int cells, double coord) {
  const double lo = box.min[role.axis];
  const double hi = box.max[role.axis];
  const double length = hi - lo;
  const double s = role.reversed ? hi - coord : coord - lo;
  if (!(s >= 0.0 && s <= length)) return -1;
  int idx = 0;
  for (int k = 1; k < cells; ++k) {
    if (s >= k * length / cells) idx = k;
  }
  return idx;
}

}  // namespace

ZoneGrid::ZoneGrid(const Aabb& box, const AxisAssignment& axes) : box_(box), axes_(axes) {
  box_.validate();
  axes_.validate();
}

std::optional<ZoneId> ZoneGrid::zone_of(const Vec3& p) const {
  const int cc = cell_index(box_, axes_.cranio_caudal, 3, p[axes_.cranio_caudal.axis]);
  const int side = cell_index(box_, axes_.side, 2, p[axes_.side.axis]);
  const int ml = cell_index(box_, axes_.medial_lateral, 2, p[axes_.medial_lateral.axis]);
  if (cc < 0 || side < 0 || ml < 0) return std::nullopt;
  return ZoneId(static_cast<Apical>(cc), static_cast<Side>(side), static_cast<Depth>(ml));
}

Aabb ZoneGrid::cell_bounds(ZoneId zone) const {
  Aabb cell = box_;
  const std::array<std::pair<RoleSplit, int>, 3> parts{{
      {{&axes_.cranio_caudal, 3}, static_cast<int>(zone.cc())},
      {{&axes_.side, 2}, static_cast<int>(zone.side())},
      {{&axes_.medial_lateral, 2}, static_cast<int>(zone.ml())},
  }};
  for (const auto& [split, idx] : parts) {
    const int a = split.role->axis;
    const double lo = box_.min[a];
    const double hi = box_.max[a];
    const double length = hi - lo;
    const double s0 = idx * length / split.cells;
    const double s1 = idx + 1 == split.cells ? length : (idx + 1) * length / split.cells;
    if (split.role->reversed) {
      cell.min[a] = hi - s1;
      cell.max[a] = hi - s0;
    } else {
      cell.min[a] = lo + s0;
      cell.max[a] = lo + s1;
    }
  }
  return cell;
}

ZoneGrid build_zone_grid(const Aabb& box, const AxisAssignment& axes) { return ZoneGrid(box, axes); }

std::optional<ZoneId> zone_of_point(const ZoneGrid& grid, const Vec3& p) { return grid.zone_of(p); }

ProstateModel ProstateModel::from_mesh(TriMesh mesh, const AxisAssignment& axes) {
  mesh.validate_indices();
  const Aabb box = mesh_aabb(mesh);
  ZoneGrid zones(box, axes);
  return ProstateModel{std::move(mesh), box, std::move(zones)};
}

}  // namespace biopsym
