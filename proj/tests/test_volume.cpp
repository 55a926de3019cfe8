#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "biopsym/error.hpp"
#include "biopsym/volume.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace biopsym;

namespace {

UsVolume random_volume(std::uint64_t seed, GridDims dims, Vec3 spacing, Vec3 origin) {
  gen::Rng rng(seed);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (auto& x : v) x = static_cast<std::uint8_t>(rng.integer(0, 255));
  return UsVolume(dims, spacing, origin, std::move(v));
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected biopsym::Error");
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("volume construction rejects broken invariants") {
  CHECK(code_of([] { UsVolume({1, 4, 4}, Vec3::Ones(), Vec3::Zero(), std::vector<std::uint8_t>(16)); }) ==
        Errc::invariant_violation);
  CHECK(code_of([] { UsVolume({2, 2, 2}, Vec3(1, 0, 1), Vec3::Zero(), std::vector<std::uint8_t>(8)); }) ==
        Errc::invariant_violation);
  CHECK(code_of([] { UsVolume({2, 2, 2}, Vec3::Ones(), Vec3::Zero(), std::vector<std::uint8_t>(7)); }) ==
        Errc::invariant_violation);
  CHECK_NOTHROW(UsVolume({2, 2, 2}, Vec3::Ones(), Vec3::Zero(), std::vector<std::uint8_t>(8)));
}

// Dyadic spacing keeps voxel centers exactly representable, so equality is exact.
TEST_CASE("trilinear sample hits voxel values at voxel centers") {
  const auto vol = random_volume(3, {5, 6, 7}, Vec3(0.5, 0.75, 1.125), Vec3(-1, 2.5, 3));
  for (int k = 0; k < 7; ++k) {
    for (int j = 0; j < 6; ++j) {
      for (int i = 0; i < 5; ++i) CHECK(sample_trilinear(vol, vol.voxel_center(i, j, k)) == vol.at(i, j, k));
    }
  }
}

TEST_CASE("trilinear sample matches the 8-corner weighted sum") {
  const auto vol = random_volume(11, {9, 8, 10}, Vec3(0.9, 1.3, 0.6), Vec3(2, -4, 1));
  const Vec3 lo = vol.origin() - Vec3::Constant(2.0);
  const Vec3 hi = vol.max_center() + Vec3::Constant(2.0);
  gen::for_all(5000, 21, [&](gen::Rng& rng, int) {
    const Vec3 p = rng.vec_in(lo, hi);
    CHECK(sample_trilinear(vol, p) == doctest::Approx(oracle::trilinear(vol, p)).epsilon(1e-12));
  });
}

TEST_CASE("sampling outside the voxel-center hull pads with zero") {
  const auto vol = random_volume(5, {4, 4, 4}, Vec3::Ones(), Vec3::Zero());
  CHECK(sample_trilinear(vol, Vec3(-1e-9, 1, 1)) == 0.0);
  CHECK(sample_trilinear(vol, Vec3(1, 3 + 1e-9, 1)) == 0.0);
  CHECK(sample_trilinear(vol, Vec3(3, 3, 3)) == vol.at(3, 3, 3));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(sample_trilinear(vol, Vec3(nan, 1, 1)) == 0.0);
}

TEST_CASE("property: trilinear value stays within the voxel range of its cell") {
  const auto vol = random_volume(17, {6, 6, 6}, Vec3(0.8, 0.8, 0.8), Vec3::Zero());
  gen::for_all(3000, 33, [&](gen::Rng& rng, int) {
    const Vec3 p = rng.vec_in(vol.origin(), vol.max_center());
    const double v = sample_trilinear(vol, p);
    CHECK(v >= 0.0);
    CHECK(v <= 255.0);
  });
}

TEST_CASE("extract_slice equals per-pixel trilinear samples") {
  const auto vol = random_volume(8, {24, 20, 28}, Vec3(1, 1, 1), Vec3(-12, -10, -14));
  gen::for_all(5, 41, [&](gen::Rng& rng, int) {
    SlicePlane plane;
    plane.center = rng.vec_in(Vec3(-5, -5, -5), Vec3(5, 5, 5));
    plane.u_axis = rng.unit_vector();
    plane.v_axis = plane.u_axis.cross(rng.unit_vector()).normalized();
    plane.width_mm = rng.uniform(10, 40);
    plane.height_mm = rng.uniform(10, 40);
    plane.px_w = rng.integer(8, 64);
    plane.px_h = rng.integer(8, 64);
    const SliceImage img = extract_slice(vol, plane);
    REQUIRE(img.pixels.size() == static_cast<std::size_t>(plane.px_w * plane.px_h));
    for (int j = 0; j < plane.px_h; ++j) {
      for (int i = 0; i < plane.px_w; ++i) {
        const double a = (i + 0.5 - plane.px_w / 2.0) * plane.mm_per_px_u();
        const double b = (j + 0.5 - plane.px_h / 2.0) * plane.mm_per_px_v();
        const Vec3 p(plane.center.x() + a * plane.u_axis.x() + b * plane.v_axis.x(),
                     plane.center.y() + a * plane.u_axis.y() + b * plane.v_axis.y(),
                     plane.center.z() + a * plane.u_axis.z() + b * plane.v_axis.z());
        const auto expected = static_cast<std::uint8_t>(std::floor(sample_trilinear(vol, p) + 0.5));
        CHECK(img.pixel(i, j) == expected);
        CHECK(img.inside(i, j));
      }
    }
  });
}

TEST_CASE("slice plane with non-orthonormal axes is degenerate") {
  const auto vol = random_volume(1, {4, 4, 4}, Vec3::Ones(), Vec3::Zero());
  SlicePlane plane;
  plane.v_axis = Vec3(0.1, 1, 0).normalized();
  CHECK(code_of([&] { extract_slice(vol, plane); }) == Errc::degenerate_geometry);
  plane.v_axis = Vec3(0, 2, 0);
  CHECK(code_of([&] { extract_slice(vol, plane); }) == Errc::degenerate_geometry);
  plane.v_axis = Vec3::UnitY();
  plane.px_w = 1;
  CHECK(code_of([&] { extract_slice(vol, plane); }) == Errc::degenerate_geometry);
}

TEST_CASE("sector mask agrees with an angle-between-vectors oracle") {
  gen::for_all(40, 51, [&](gen::Rng& rng, int) {
    SectorSpec s;
    s.fov_deg = rng.uniform(20, 179);
    s.r_min_mm = rng.uniform(0, 5);
    s.r_max_mm = s.r_min_mm + rng.uniform(5, 60);
    s.apex_px = Vec2(rng.uniform(0, 64), rng.uniform(-5, 10));
    s.direction_deg = rng.uniform(-180, 180);
    const double mu = rng.uniform(0.2, 1.0), mv = rng.uniform(0.2, 1.0);
    const Vec2 dir(std::cos(deg_to_rad(s.direction_deg)), std::sin(deg_to_rad(s.direction_deg)));
    for (int j = 0; j < 64; j += 3) {
      for (int i = 0; i < 64; i += 3) {
        const Vec2 d((i + 0.5 - s.apex_px.x()) * mu, (j + 0.5 - s.apex_px.y()) * mv);
        const double r = d.norm();
        const double angle = rad_to_deg(std::acos(std::clamp(d.dot(dir) / r, -1.0, 1.0)));
        // Skip points within rounding distance of an edge.
        if (std::abs(r - s.r_min_mm) < 1e-9 || std::abs(r - s.r_max_mm) < 1e-9 ||
            std::abs(angle - s.fov_deg / 2) < 1e-7)
          continue;
        const bool expected = r >= s.r_min_mm && r <= s.r_max_mm && angle <= s.fov_deg / 2;
        CHECK(in_sector(s, mu, mv, i, j) == expected);
      }
    }
  });
}

TEST_CASE("apply_sector_mask zeroes exactly the pixels outside the fan") {
  SliceImage img;
  img.px_w = img.px_h = 32;
  img.mm_per_px_u = img.mm_per_px_v = 1.0;
  img.pixels.assign(32 * 32, 200);
  img.mask.assign(32 * 32, 1);
  SectorSpec s{90.0, 2.0, 25.0, Vec2(16, 0), 90.0};
  const SliceImage out = apply_sector_mask(img, s);
  for (int j = 0; j < 32; ++j) {
    for (int i = 0; i < 32; ++i) {
      const bool in = in_sector(s, 1.0, 1.0, i, j);
      CHECK(out.inside(i, j) == in);
      CHECK(out.pixel(i, j) == (in ? 200 : 0));
    }
  }
  s.r_min_mm = 30.0;
  CHECK(code_of([&] { apply_sector_mask(img, s); }) == Errc::invalid_argument);
}

TEST_CASE("pgm output carries a P5 header and raw rows") {
  SliceImage img;
  img.px_w = 3;
  img.px_h = 2;
  img.pixels = {1, 2, 3, 4, 5, 6};
  std::ostringstream out;
  write_pgm(img, out);
  CHECK(out.str() == std::string("P5\n3 2\n255\n\x01\x02\x03\x04\x05\x06", 17));
}

TEST_CASE("phantom is deterministic per seed") {
  const PhantomSpec spec = PhantomSpec::standard(42, 48);
  const UsVolume a = generate_phantom(spec);
  const UsVolume b = generate_phantom(spec);
  CHECK(a == b);
  const UsVolume c = generate_phantom(PhantomSpec::standard(43, 48));
  CHECK_FALSE(a == c);
}

TEST_CASE("phantom intensities follow the tissue labels") {
  const PhantomSpec spec = PhantomSpec::standard(5, 64);
  const UsVolume vol = generate_phantom(spec);
  const auto labels = phantom_labels(spec);
  REQUIRE(labels.size() == vol.voxel_count());
  auto band = [&](double mean) {
    return std::pair{std::floor(mean * (1 - spec.speckle_contrast) + 0.5),
                     std::min(255.0, std::floor(mean * (1 + spec.speckle_contrast) + 0.5))};
  };
  std::size_t counts[4] = {};
  for (std::size_t n = 0; n < labels.size(); ++n) {
    double mean = spec.exterior_mean;
    switch (labels[n]) {
      case Tissue::prostate: mean = spec.interior_mean; break;
      case Tissue::bladder: mean = spec.bladder_mean; break;
      case Tissue::rectal_wall: mean = spec.wall_mean; break;
      case Tissue::exterior: break;
    }
    ++counts[static_cast<int>(labels[n])];
    const auto [lo, hi] = band(mean);
    const double v = vol.voxels()[n];
    if (v < lo || v > hi) FAIL("voxel " << n << " intensity " << v << " outside [" << lo << ", " << hi << "]");
  }
  for (auto c : counts) CHECK(c > 0);
}

TEST_CASE("tissue labels follow the analytic shapes with bladder priority") {
  const PhantomSpec spec = PhantomSpec::standard(1);
  CHECK(tissue_at(spec, spec.prostate.center) == Tissue::prostate);
  CHECK(tissue_at(spec, spec.bladder.center) == Tissue::bladder);
  CHECK(tissue_at(spec, Vec3(11.0, 0.0, 25.0)) == Tissue::rectal_wall);
  CHECK(tissue_at(spec, Vec3(-20.0, -40.0, 20.0)) == Tissue::exterior);
  PhantomSpec overlap = spec;
  overlap.bladder.center = spec.prostate.center;
  overlap.bladder.radius_mm = 2.0;
  CHECK(tissue_at(overlap, spec.prostate.center) == Tissue::bladder);
}

TEST_CASE("phantom spec validation") {
  PhantomSpec spec = PhantomSpec::standard(1, 32);
  spec.prostate.center.z() = 200.0;
  CHECK(code_of([&] { generate_phantom(spec); }) == Errc::out_of_bounds);
  spec = PhantomSpec::standard(1, 32);
  spec.interior_mean = 200.0;
  CHECK(code_of([&] { generate_phantom(spec); }) == Errc::invalid_argument);
  spec = PhantomSpec::standard(1, 32);
  spec.speckle_contrast = 1.5;
  CHECK(code_of([&] { generate_phantom(spec); }) == Errc::invalid_argument);
}

TEST_CASE("volume file round trip and error mapping") {
  const auto vol = random_volume(9, {3, 4, 5}, Vec3(0.1, 1.0 / 3.0, 2.5), Vec3(-1e-7, 12.25, 1e5));
  std::stringstream buf;
  write_volume(vol, buf);
  CHECK(read_volume(buf) == vol);

  auto read = [](const std::string& s) {
    std::istringstream in(s);
    return read_volume(in);
  };
  CHECK(code_of([&] { read("USVOL2 2 2 2 1 1 1 0 0 0\n" + std::string(8, 'x')); }) == Errc::malformed_header);
  CHECK(code_of([&] { read("USVOL1 2 2 2 1 1 1 0 0\n" + std::string(8, 'x')); }) == Errc::malformed_header);
  CHECK(code_of([&] { read("USVOL1 2 2 2 1 1 1 0 0 0 extra\n" + std::string(8, 'x')); }) == Errc::malformed_header);
  CHECK(code_of([&] { read("USVOL1 2 2 2 1 1 1 0 0 0"); }) == Errc::malformed_header);
  CHECK(code_of([&] { read("USVOL1 1 2 2 1 1 1 0 0 0\n" + std::string(4, 'x')); }) == Errc::invariant_violation);
  CHECK(code_of([&] { read("USVOL1 2 2 2 1 -1 1 0 0 0\n" + std::string(8, 'x')); }) == Errc::invariant_violation);
  CHECK(code_of([&] { read("USVOL1 2 2 2 1 1 1 0 0 0\n" + std::string(7, 'x')); }) == Errc::truncated_payload);
  CHECK(code_of([&] { read("USVOL1 100000 100000 100000 1 1 1 0 0 0\n"); }) == Errc::invariant_violation);
  CHECK(code_of([] { load_volume("/nonexistent/volume.usv"); }) == Errc::io_failure);
}
