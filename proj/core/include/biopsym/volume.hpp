#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "biopsym/geometry.hpp"

namespace biopsym {

using GridDims = std::array<int, 3>;

/// A 3D ultrasound intensity grid. Voxel (i,j,k) has its center at
/// origin + (i*sx, j*sy, k*sz); storage is x-fastest. Immutable once built,
/// so a single instance can be sampled from many threads.
class UsVolume {
 public:
  /// Throws Error{invariant_violation} if any dim < 2, any spacing <= 0, or the
  /// voxel buffer does not hold nx*ny*nz values.
  UsVolume(GridDims dims, Vec3 spacing, Vec3 origin, std::vector<std::uint8_t> voxels);

  const GridDims& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  std::span<const std::uint8_t> voxels() const { return voxels_; }
  std::size_t voxel_count() const { return voxels_.size(); }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  std::uint8_t at(int i, int j, int k) const { return voxels_[index(i, j, k)]; }
  Vec3 voxel_center(int i, int j, int k) const {
    return origin_ + Vec3(i * spacing_.x(), j * spacing_.y(), k * spacing_.z());
  }
  /// World position of the last voxel center (the far corner of the sampling hull).
  Vec3 max_center() const { return voxel_center(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1); }

  friend bool operator==(const UsVolume&, const UsVolume&) = default;

 private:
  GridDims dims_;
  Vec3 spacing_;
  Vec3 origin_;
  std::vector<std::uint8_t> voxels_;
};

/// An oriented rectangle in world space sampled on a px_w x px_h grid.
struct SlicePlane {
  Vec3 center{Vec3::Zero()};
  Vec3 u_axis{Vec3::UnitX()};
  Vec3 v_axis{Vec3::UnitY()};
  double width_mm = 100.0;
  double height_mm = 100.0;
  int px_w = 256;
  int px_h = 256;

  double mm_per_px_u() const { return width_mm / px_w; }
  double mm_per_px_v() const { return height_mm / px_h; }
  Vec3 normal() const { return u_axis.cross(v_axis); }

  /// Throws Error{degenerate_geometry} when the axes are not orthonormal to
  /// 1e-9 or the extents/resolution are invalid.
  void validate() const;
};

struct SliceImage {
  int px_w = 0;
  int px_h = 0;
  double mm_per_px_u = 0.0;
  double mm_per_px_v = 0.0;
  std::vector<std::uint8_t> pixels;  // row-major, row j = v index
  std::vector<std::uint8_t> mask;    // 1 = inside the imaged sector

  std::uint8_t pixel(int i, int j) const { return pixels[static_cast<std::size_t>(j) * px_w + i]; }
  bool inside(int i, int j) const { return mask[static_cast<std::size_t>(j) * px_w + i] != 0; }
};

/// Annular fan in image space. apex_px is in pixel units where pixel (i,j)
/// covers [i, i+1) x [j, j+1). direction_deg is the fan bisector measured from
/// the +i axis towards +j; 90 means the fan opens towards increasing rows.
struct SectorSpec {
  double fov_deg = 140.0;
  double r_min_mm = 0.0;
  double r_max_mm = 80.0;
  Vec2 apex_px{Vec2::Zero()};
  double direction_deg = 90.0;

  void validate() const;
};

/// Trilinear intensity at a world point. Anything outside the hull of voxel
/// centers samples to 0.
double sample_trilinear(const UsVolume& vol, const Vec3& p);

/// Resamples the volume on the plane's pixel centers; mask is all-true.
SliceImage extract_slice(const UsVolume& vol, const SlicePlane& plane);

/// Zeroes pixels outside the annular sector and clears their mask bit.
SliceImage apply_sector_mask(SliceImage img, const SectorSpec& sector);

/// Pure predicate used by apply_sector_mask, exposed for overlays.
bool in_sector(const SectorSpec& sector, double mm_per_px_u, double mm_per_px_v, int i, int j);

// Binary PGM (P5, maxval 255).
void write_pgm(const SliceImage& img, std::ostream& out);
void write_pgm(const SliceImage& img, const std::filesystem::path& path);

struct Ellipsoid {
  Vec3 center{Vec3::Zero()};
  Vec3 semi_axes{Vec3::Ones()};

  /// (x/a)^2 + (y/b)^2 + (z/c)^2 in the ellipsoid frame; <= 1 is inside.
  double level(const Vec3& p) const {
    return ((p - center).array() / semi_axes.array()).square().sum();
  }
  bool contains(const Vec3& p) const { return level(p) <= 1.0; }
  double volume_mm3() const {
    return 4.0 / 3.0 * std::numbers::pi * semi_axes.x() * semi_axes.y() * semi_axes.z();
  }
};

struct Sphere {
  Vec3 center{Vec3::Zero()};
  double radius_mm = 1.0;

  bool contains(const Vec3& p) const { return (p - center).squaredNorm() <= radius_mm * radius_mm; }
};

/// Bright partial cylindrical shell around an axis parallel to world z.
struct RectalWall {
  Vec2 axis_xy{Vec2::Zero()};
  double radius_mm = 10.0;
  double thickness_mm = 2.5;
  double arc_deg = 120.0;  // angular extent, centred on +x
  double z_min_mm = 15.0;
  double z_max_mm = 100.0;

  bool contains(const Vec3& p) const;
};

struct PhantomSpec {
  std::uint64_t seed = 1;
  GridDims dims{128, 128, 128};
  Vec3 spacing{0.8, 0.8, 0.8};
  Vec3 origin{-31.6, -50.8, 10.4};

  Ellipsoid prostate{Vec3(18.0, 0.0, 55.0), Vec3(15.0, 22.0, 17.5)};
  Sphere bladder{Vec3(28.0, 0.0, 92.0), 15.0};
  RectalWall rectal_wall{};

  double speckle_contrast = 0.3;
  double interior_mean = 60.0;   // prostate (hypoechoic)
  double exterior_mean = 110.0;  // surrounding tissue
  double bladder_mean = 8.0;     // anechoic
  double wall_mean = 220.0;

  /// Standard pelvis geometry resampled onto an n^3 grid covering the same
  /// 102.4 mm field of view.
  static PhantomSpec standard(std::uint64_t seed, int n = 128);

  /// Throws Error{invalid_argument} for bad parameters and
  /// Error{out_of_bounds} when the prostate or bladder leave the sampling hull.
  void validate() const;
};

enum class Tissue : std::uint8_t { exterior = 0, prostate = 1, bladder = 2, rectal_wall = 3 };

/// Tissue class at a world point. Overlaps resolve bladder > prostate > wall.
Tissue tissue_at(const PhantomSpec& spec, const Vec3& p);

/// Per-voxel tissue labels on the phantom grid, same layout as the volume.
std::vector<Tissue> phantom_labels(const PhantomSpec& spec);

/// Deterministic for a fixed spec (including seed).
UsVolume generate_phantom(const PhantomSpec& spec);

// USVOL1 file format: "USVOL1 nx ny nz sx sy sz ox oy oz\n" then raw x-fastest bytes.
UsVolume read_volume(std::istream& in);
void write_volume(const UsVolume& vol, std::ostream& out);
UsVolume load_volume(const std::filesystem::path& path);
void save_volume(const UsVolume& vol, const std::filesystem::path& path);

}  // namespace biopsym
