#include <algorithm>
#include <cmath>
#include <random>

#include "biopsym/error.hpp"
#include "biopsym/volume.hpp"

namespace biopsym {

bool RectalWall::contains(const Vec3& p) const {
  if (p.z() < z_min_mm || p.z() > z_max_mm) return false;
  const Vec2 d(p.x() - axis_xy.x(), p.y() - axis_xy.y());
  const double r = d.norm();
  if (r < radius_mm || r > radius_mm + thickness_mm) return false;
  return std::abs(std::atan2(d.y(), d.x())) <= deg_to_rad(arc_deg) / 2.0;
}

PhantomSpec PhantomSpec::standard(std::uint64_t seed, int n) {
  constexpr double fov_mm = 102.4;
  PhantomSpec spec;
  spec.seed = seed;
  spec.dims = {n, n, n};
  const double s = fov_mm / n;
  spec.spacing = Vec3(s, s, s);
  spec.origin = Vec3(-32.0, -51.2, 10.0) + Vec3::Constant(s / 2.0);
  return spec;
}

void PhantomSpec::validate() const {
  auto fail = [](const char* what) { throw Error(Errc::invalid_argument, what); };
  for (int d : dims) {
    if (d < 2) fail("phantom dims must be >= 2");
  }
  if (!(spacing.array() > 0.0).all()) fail("phantom spacing must be positive");
  if (!(prostate.semi_axes.array() > 0.0).all()) fail("prostate semi-axes must be positive");
  if (!(bladder.radius_mm > 0.0)) fail("bladder radius must be positive");
  if (!(rectal_wall.radius_mm > 0.0 && rectal_wall.thickness_mm > 0.0)) fail("rectal wall radius/thickness must be positive");
  if (!(rectal_wall.arc_deg > 0.0 && rectal_wall.arc_deg <= 360.0)) fail("rectal wall arc must be in (0, 360]");
  if (!(speckle_contrast >= 0.0 && speckle_contrast <= 1.0)) fail("speckle contrast must be in [0, 1]");
  for (double m : {interior_mean, exterior_mean, bladder_mean, wall_mean}) {
    if (!(m >= 0.0 && m <= 255.0)) fail("mean intensity levels must be in [0, 255]");
  }
  if (!(interior_mean < exterior_mean)) fail("prostate must be hypoechoic: interior mean < exterior mean");

  const Vec3 lo = origin;
  const Vec3 hi = origin + Vec3((dims[0] - 1) * spacing.x(), (dims[1] - 1) * spacing.y(), (dims[2] - 1) * spacing.z());
  auto inside_hull = [&](const Vec3& a, const Vec3& b) {
    return (a.array() >= lo.array()).all() && (b.array() <= hi.array()).all();
  };
  if (!inside_hull(prostate.center - prostate.semi_axes, prostate.center + prostate.semi_axes)) {
    throw Error(Errc::out_of_bounds, "prostate ellipsoid exceeds the volume bounds");
  }
  const Vec3 r = Vec3::Constant(bladder.radius_mm);
  if (!inside_hull(bladder.center - r, bladder.center + r)) {
    throw Error(Errc::out_of_bounds, "bladder sphere exceeds the volume bounds");
  }
}

Tissue tissue_at(const PhantomSpec& spec, const Vec3& p) {
  if (spec.bladder.contains(p)) return Tissue::bladder;
  if (spec.prostate.contains(p)) return Tissue::prostate;
  if (spec.rectal_wall.contains(p)) return Tissue::rectal_wall;
  return Tissue::exterior;
}

namespace {

Vec3 grid_point(const PhantomSpec& spec, int i, int j, int k) {
  return spec.origin + Vec3(i * spec.spacing.x(), j * spec.spacing.y(), k * spec.spacing.z());
}

}  // namespace

std::vector<Tissue> phantom_labels(const PhantomSpec& spec) {
  spec.validate();
  const auto [nx, ny, nz] = spec.dims;
  std::vector<Tissue> labels;
  labels.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) labels.push_back(tissue_at(spec, grid_point(spec, i, j, k)));
    }
  }
  return labels;
}

UsVolume generate_phantom(const PhantomSpec& spec) {
  spec.validate();

  const auto [nx, ny, nz] = spec.dims;
  std::vector<std::uint8_t> voxels(static_cast<std::size_t>(nx) * ny * nz);

  // Raw engine output mapped to [0,1) by hand: std distributions are not
  // guaranteed to produce the same sequence across standard libraries.
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  std::size_t idx = 0;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i, ++idx) {
        double mean = spec.exterior_mean;
        switch (tissue_at(spec, grid_point(spec, i, j, k))) {
          case Tissue::bladder: mean = spec.bladder_mean; break;
          case Tissue::prostate: mean = spec.interior_mean; break;
          case Tissue::rectal_wall: mean = spec.wall_mean; break;
          case Tissue::exterior: break;
        }
        const double factor = 1.0 + spec.speckle_contrast * (2.0 * uniform() - 1.0);
        voxels[idx] = static_cast<std::uint8_t>(std::clamp(std::floor(mean * factor + 0.5), 0.0, 255.0));
      }
    }
  }
  return UsVolume(spec.dims, spec.spacing, spec.origin, std::move(voxels));
}

}  // namespace biopsym
