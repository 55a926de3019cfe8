#include "biopsym/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "biopsym/error.hpp"

namespace biopsym {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::invariant_violation: return "invariant_violation";
    case Errc::degenerate_geometry: return "degenerate_geometry";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::malformed_header: return "malformed_header";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::parse_error: return "parse_error";
    case Errc::io_failure: return "io_failure";
    case Errc::not_found: return "not_found";
    case Errc::unknown_reference: return "unknown_reference";
    case Errc::corrupt_record: return "corrupt_record";
  }
  return "unknown";
}

UsVolume::UsVolume(GridDims dims, Vec3 spacing, Vec3 origin, std::vector<std::uint8_t> voxels)
    : dims_(dims), spacing_(spacing), origin_(origin), voxels_(std::move(voxels)) {
  for (int d : dims_) {
    if (d < 2) throw Error(Errc::invariant_violation, "volume dims must all be >= 2");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a]))
      throw Error(Errc::invariant_violation, "volume spacing must be positive");
    if (!std::isfinite(origin_[a])) throw Error(Errc::invariant_violation, "volume origin must be finite");
  }
  const auto expected = static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
                        static_cast<std::size_t>(dims_[2]);
  if (voxels_.size() != expected) {
    throw Error(Errc::invariant_violation,
                "voxel buffer holds " + std::to_string(voxels_.size()) + " values, expected " +
                    std::to_string(expected));
  }
}

namespace {

// Shared by sample_trilinear and extract_slice so both paths produce the same
// bits for the same world point.
struct Sampler {
  const std::uint8_t* data;
  int nx, ny, nz;
  std::size_t stride_y, stride_z;
  double ox, oy, oz;
  double sx, sy, sz;

  explicit Sampler(const UsVolume& vol)
      : data(vol.voxels().data()),
        nx(vol.dims()[0]),
        ny(vol.dims()[1]),
        nz(vol.dims()[2]),
        stride_y(static_cast<std::size_t>(nx)),
        stride_z(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)),
        ox(vol.origin().x()),
        oy(vol.origin().y()),
        oz(vol.origin().z()),
        sx(vol.spacing().x()),
        sy(vol.spacing().y()),
        sz(vol.spacing().z()) {}

  double operator()(double px, double py, double pz) const {
    const double fx = (px - ox) / sx;
    const double fy = (py - oy) / sy;
    const double fz = (pz - oz) / sz;
    // Negated comparisons also send NaN to the padding value.
    if (!(fx >= 0.0 && fx <= nx - 1 && fy >= 0.0 && fy <= ny - 1 && fz >= 0.0 && fz <= nz - 1)) {
      return 0.0;
    }
    const int i = std::min(static_cast<int>(fx), nx - 2);
    const int j = std::min(static_cast<int>(fy), ny - 2);
    const int k = std::min(static_cast<int>(fz), nz - 2);
    const double tx = fx - i;
    const double ty = fy - j;
    const double tz = fz - k;

    const std::uint8_t* p = data + static_cast<std::size_t>(i) + j * stride_y + k * stride_z;
    const double c000 = p[0], c100 = p[1];
    const double c010 = p[stride_y], c110 = p[stride_y + 1];
    const double c001 = p[stride_z], c101 = p[stride_z + 1];
    const double c011 = p[stride_z + stride_y], c111 = p[stride_z + stride_y + 1];

    const double c00 = c000 + (c100 - c000) * tx;
    const double c10 = c010 + (c110 - c010) * tx;
    const double c01 = c001 + (c101 - c001) * tx;
    const double c11 = c011 + (c111 - c011) * tx;
    const double c0 = c00 + (c10 - c00) * ty;
    const double c1 = c01 + (c11 - c01) * ty;
    return c0 + (c1 - c0) * tz;
  }
};

// floor(v + 0.5) clamped to [0, 255]. Truncation equals floor on the
// non-negative branch and avoids a libm call per pixel.
std::uint8_t round_intensity(double v) {
  const double r = v + 0.5;
  if (!(r >= 0.0)) return 0;
  if (r >= 256.0) return 255;
  return static_cast<std::uint8_t>(static_cast<int>(r));
}

}  // namespace

double sample_trilinear(const UsVolume& vol, const Vec3& p) {
  return Sampler(vol)(p.x(), p.y(), p.z());
}

void SlicePlane::validate() const {
  constexpr double tol = 1e-9;
  if (std::abs(u_axis.norm() - 1.0) > tol || std::abs(v_axis.norm() - 1.0) > tol ||
      std::abs(u_axis.dot(v_axis)) > tol) {
    throw Error(Errc::degenerate_geometry, "slice plane axes are not orthonormal");
  }
  if (!(width_mm > 0.0) || !(height_mm > 0.0)) {
    throw Error(Errc::degenerate_geometry, "slice plane extent must be positive");
  }
  if (px_w < 2 || px_h < 2) throw Error(Errc::degenerate_geometry, "slice resolution must be >= 2");
  if (!center.allFinite()) throw Error(Errc::degenerate_geometry, "slice plane center is not finite");
}

SliceImage extract_slice(const UsVolume& vol, const SlicePlane& plane) {
  plane.validate();

  SliceImage img;
  img.px_w = plane.px_w;
  img.px_h = plane.px_h;
  img.mm_per_px_u = plane.mm_per_px_u();
  img.mm_per_px_v = plane.mm_per_px_v();
  const std::size_t count = static_cast<std::size_t>(plane.px_w) * static_cast<std::size_t>(plane.px_h);
  img.pixels.resize(count);
  img.mask.assign(count, 1);

  const Sampler sample(vol);
  const double half_w = plane.px_w / 2.0;
  const double half_h = plane.px_h / 2.0;
  // Local copies: the byte stores below may alias anything reachable by reference.
  const Vec3 c = plane.center;
  const Vec3 u = plane.u_axis;
  const Vec3 v = plane.v_axis;

  // Column terms (c + a*u) and row terms b*v are hoisted; their sum is formed
  // in the same order as the per-pixel expression, so the bits match.
  std::vector<double> col(3 * static_cast<std::size_t>(plane.px_w));
  for (int i = 0; i < plane.px_w; ++i) {
    const double a = (i + 0.5 - half_w) * img.mm_per_px_u;
    col[3 * i] = c.x() + a * u.x();
    col[3 * i + 1] = c.y() + a * u.y();
    col[3 * i + 2] = c.z() + a * u.z();
  }
  std::uint8_t* out = img.pixels.data();
  for (int j = 0; j < plane.px_h; ++j) {
    const double b = (j + 0.5 - half_h) * img.mm_per_px_v;
    const double bx = b * v.x(), by = b * v.y(), bz = b * v.z();
    const double* cu = col.data();
    for (int i = 0; i < plane.px_w; ++i, cu += 3) *out++ = round_intensity(sample(cu[0] + bx, cu[1] + by, cu[2] + bz));
  }
  return img;
}

void SectorSpec::validate() const {
  if (!(fov_deg > 0.0 && fov_deg <= 360.0)) throw Error(Errc::invalid_argument, "sector fov must be in (0, 360]");
  if (!(r_min_mm >= 0.0 && r_min_mm < r_max_mm)) {
    throw Error(Errc::invalid_argument, "sector radii must satisfy 0 <= r_min < r_max");
  }
  if (!apex_px.allFinite() || !std::isfinite(direction_deg)) {
    throw Error(Errc::invalid_argument, "sector apex/direction must be finite");
  }
}

bool in_sector(const SectorSpec& sector, double mm_per_px_u, double mm_per_px_v, int i, int j) {
  const double dx = (i + 0.5 - sector.apex_px.x()) * mm_per_px_u;
  const double dy = (j + 0.5 - sector.apex_px.y()) * mm_per_px_v;
  const double r = std::hypot(dx, dy);
  if (r < sector.r_min_mm || r > sector.r_max_mm) return false;
  if (sector.fov_deg >= 360.0 || r == 0.0) return true;
  const double off = wrap_angle(std::atan2(dy, dx) - deg_to_rad(sector.direction_deg));
  return std::abs(off) <= deg_to_rad(sector.fov_deg) / 2.0;
}

SliceImage apply_sector_mask(SliceImage img, const SectorSpec& sector) {
  sector.validate();
  for (int j = 0; j < img.px_h; ++j) {
    for (int i = 0; i < img.px_w; ++i) {
      if (!in_sector(sector, img.mm_per_px_u, img.mm_per_px_v, i, j)) {
        const std::size_t idx = static_cast<std::size_t>(j) * img.px_w + i;
        img.pixels[idx] = 0;
        img.mask[idx] = 0;
      }
    }
  }
  return img;
}

void write_pgm(const SliceImage& img, std::ostream& out) {
  out << "P5\n" << img.px_w << ' ' << img.px_h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw Error(Errc::io_failure, "failed writing PGM");
}

void write_pgm(const SliceImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
  write_pgm(img, out);
}

}  // namespace biopsym
