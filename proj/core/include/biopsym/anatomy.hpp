#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "biopsym/geometry.hpp"

namespace biopsym {

struct Aabb {
  Vec3 min{Vec3::Zero()};
  Vec3 max{Vec3::Ones()};

  /// Throws Error{degenerate_geometry} unless min < max componentwise.
  void validate() const;
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 extent() const { return max - min; }
  double volume() const { return extent().prod(); }
};

/// Closed, orientable triangle mesh in world millimetres.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  /// Throws Error{invalid_argument} on out-of-range indices.
  void validate_indices() const;
};

/// Every directed edge appears exactly once and its reverse exactly once.
bool is_closed_manifold(const TriMesh& mesh);

/// Signed volume via the divergence theorem (positive for outward winding).
double mesh_volume(const TriMesh& mesh);

/// Throws Error{invalid_argument} for an empty mesh.
Aabb mesh_aabb(const TriMesh& mesh);

/// Ray-parity containment along +z. Degenerate hits (vertex, edge) are
/// resolved by symbolically perturbing the query point, so every ray crosses
/// a closed mesh an even number of times.
bool point_in_mesh(const TriMesh& mesh, const Vec3& p);

struct InsideInterval {
  double t0 = 0.0;  // segment parameters in [0, 1]
  double t1 = 0.0;
  Vec3 entry{Vec3::Zero()};
  Vec3 exit{Vec3::Zero()};
};

struct InsideLength {
  double length_mm = 0.0;
  std::vector<InsideInterval> intervals;  // disjoint, ordered along the segment
};

/// Length of the part of the segment interior to the mesh. Triangle hits
/// closer than 1e-9 in segment parameter are merged; each resulting
/// sub-interval is classified by its midpoint.
InsideLength inside_length(const TriMesh& mesh, const Segment& seg);

/// Icosphere with the given number of midpoint subdivisions (>= 1), scaled to
/// the semi-axes and translated to center. Outward winding.
TriMesh generate_ellipsoid_mesh(const Vec3& center, const Vec3& semi_axes, int subdivisions);

/// 1 - min face-plane distance of the unit icosphere at this subdivision
/// level. An affinely scaled icosphere lies between level sets
/// (1 - sagitta)^2 and 1 of its analytic ellipsoid.
double icosphere_sagitta(int subdivisions);

// OBJ subset: "v x y z" and triangular "f i j k" (1-based); everything else skipped.
TriMesh read_obj(std::istream& in);
void write_obj(const TriMesh& mesh, std::ostream& out);
TriMesh load_obj(const std::filesystem::path& path);
void save_obj(const TriMesh& mesh, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// 12-zone decomposition

enum class Apical : std::uint8_t { base = 0, mid = 1, apex = 2 };
enum class Side : std::uint8_t { right = 0, left = 1 };
enum class Depth : std::uint8_t { medial = 0, lateral = 1 };

/// Zone index cc*4 + side*2 + ml, in [0, 11].
class ZoneId {
 public:
  static constexpr int kCount = 12;

  constexpr ZoneId() = default;
  /// Throws Error{invalid_argument} outside [0, 11].
  explicit ZoneId(int value);
  constexpr ZoneId(Apical cc, Side side, Depth ml)
      : value_(static_cast<std::uint8_t>(static_cast<int>(cc) * 4 + static_cast<int>(side) * 2 +
                                         static_cast<int>(ml))) {}

  constexpr int value() const { return value_; }
  constexpr Apical cc() const { return static_cast<Apical>(value_ / 4); }
  constexpr Side side() const { return static_cast<Side>((value_ / 2) % 2); }
  constexpr Depth ml() const { return static_cast<Depth>(value_ % 2); }

  /// e.g. "right base medial"
  std::string name() const;

  friend constexpr bool operator==(ZoneId, ZoneId) = default;
  friend constexpr auto operator<=>(ZoneId, ZoneId) = default;

 private:
  std::uint8_t value_ = 0;
};

using ZoneSet = std::bitset<ZoneId::kCount>;

std::vector<ZoneId> zones_in(const ZoneSet& set);

/// Which world axis (0=x, 1=y, 2=z) plays each anatomical role, and whether
/// index 0 sits at the high-coordinate end of that axis.
struct AxisRole {
  int axis = 0;
  bool reversed = false;

  friend bool operator==(const AxisRole&, const AxisRole&) = default;
};

struct AxisAssignment {
  AxisRole cranio_caudal{2, false};  // 3 cells: base, mid, apex
  AxisRole side{1, false};           // 2 cells: right, left
  AxisRole medial_lateral{0, false};  // 2 cells: medial, lateral

  /// Throws Error{invalid_argument} unless the three axes are distinct.
  void validate() const;

  friend bool operator==(const AxisAssignment&, const AxisAssignment&) = default;
};

/// Box split into equal thirds along the cranio-caudal axis and halves along
/// the other two. Cells are half-open per axis in index space; the last cell
/// also owns the box face at the end of the axis, so classification is total.
class ZoneGrid {
 public:
  ZoneGrid(const Aabb& box, const AxisAssignment& axes);

  const Aabb& box() const { return box_; }
  const AxisAssignment& axes() const { return axes_; }

  std::optional<ZoneId> zone_of(const Vec3& p) const;
  Aabb cell_bounds(ZoneId zone) const;

 private:
  Aabb box_;
  AxisAssignment axes_;
};

/// Throws Error{degenerate_geometry} for an invalid box.
ZoneGrid build_zone_grid(const Aabb& box, const AxisAssignment& axes = {});

std::optional<ZoneId> zone_of_point(const ZoneGrid& grid, const Vec3& p);

/// Gland mesh with its bounding box and zone decomposition.
struct ProstateModel {
  TriMesh mesh;
  Aabb box;
  ZoneGrid zones;

  static ProstateModel from_mesh(TriMesh mesh, const AxisAssignment& axes = {});
};

}  // namespace biopsym
