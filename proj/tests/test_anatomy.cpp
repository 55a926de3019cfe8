#include <doctest.h>

#include <sstream>

#include "biopsym/anatomy.hpp"
#include "biopsym/error.hpp"
#include "biopsym/volume.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace biopsym;

namespace {

// Axis-aligned box as 12 outward-wound triangles.
TriMesh box_mesh(const Vec3& lo, const Vec3& hi) {
  TriMesh m;
  for (int k = 0; k < 8; ++k) m.vertices.emplace_back(k & 1 ? hi.x() : lo.x(), k & 2 ? hi.y() : lo.y(), k & 4 ? hi.z() : lo.z());
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

bool strictly_inside_box(const Vec3& lo, const Vec3& hi, const Vec3& p) {
  return (p.array() > lo.array()).all() && (p.array() < hi.array()).all();
}

// Chord of a segment through an axis-aligned box (slab method).
double box_chord(const Vec3& lo, const Vec3& hi, const Segment& s) {
  double t0 = 0.0, t1 = 1.0;
  const Vec3 d = s.p1 - s.p0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (s.p0[a] < lo[a] || s.p0[a] > hi[a]) return 0.0;
      continue;
    }
    double ta = (lo[a] - s.p0[a]) / d[a], tb = (hi[a] - s.p0[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0 ? (t1 - t0) * s.length() : 0.0;
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

TEST_CASE("box mesh sanity: closed, unit volume, winding sign") {
  TriMesh m = box_mesh(Vec3::Zero(), Vec3::Ones());
  CHECK(is_closed_manifold(m));
  CHECK(mesh_volume(m) == doctest::Approx(1.0));
  for (auto& t : m.triangles) std::swap(t[1], t[2]);
  CHECK(mesh_volume(m) == doctest::Approx(-1.0));
  m.triangles.pop_back();
  CHECK_FALSE(is_closed_manifold(m));
}

TEST_CASE("icosphere meshes are closed with the expected counts") {
  for (int s = 1; s <= 4; ++s) {
    const TriMesh m = generate_ellipsoid_mesh(Vec3(1, 2, 3), Vec3(4, 5, 6), s);
    CHECK(is_closed_manifold(m));
    CHECK(m.vertices.size() == static_cast<std::size_t>(10 * (1 << (2 * s)) + 2));
    CHECK(m.triangles.size() == static_cast<std::size_t>(20 * (1 << (2 * s))));
    CHECK(mesh_volume(m) > 0.0);
    for (const auto& v : m.vertices) {
      const double level = Ellipsoid{Vec3(1, 2, 3), Vec3(4, 5, 6)}.level(v);
      CHECK(level == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK(code_of([] { generate_ellipsoid_mesh(Vec3::Zero(), Vec3(1, 0, 1), 2); }) == Errc::invalid_argument);
  CHECK(code_of([] { generate_ellipsoid_mesh(Vec3::Zero(), Vec3::Ones(), 0); }) == Errc::invalid_argument);
}

TEST_CASE("ellipsoid mesh volume converges to the analytic volume from below") {
  const Vec3 semi(15, 22, 17.5);
  const double analytic = oracle::ellipsoid_volume_numeric(semi);
  CHECK(analytic == doctest::Approx(4.0 / 3.0 * std::numbers::pi * 15 * 22 * 17.5).epsilon(1e-6));
  double prev = 0.0;
  for (int s = 1; s <= 5; ++s) {
    const double v = mesh_volume(generate_ellipsoid_mesh(Vec3::Zero(), semi, s));
    CHECK(v < analytic);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(std::abs(prev - analytic) / analytic < 0.005);
}

TEST_CASE("point_in_mesh is exact on a box even when rays graze edges and vertices") {
  const TriMesh m = box_mesh(Vec3::Zero(), Vec3(2, 2, 2));
  // Rays along +z through x = y (the face diagonals) and through vertices.
  for (double x : {-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5}) {
    for (double y : {-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5}) {
      for (double z : {-1.0, 0.5, 1.0, 1.5, 3.0}) {
        const Vec3 p(x, y, z);
        const bool on_boundary = (x == 0 || x == 2 || y == 0 || y == 2) && x >= 0 && x <= 2 && y >= 0 && y <= 2;
        if (on_boundary) continue;
        CHECK(point_in_mesh(m, p) == strictly_inside_box(Vec3::Zero(), Vec3(2, 2, 2), p));
      }
    }
  }
}

TEST_CASE("property: point_in_mesh agrees with the ellipsoid outside the sagitta shell") {
  const int subdiv = 3;
  const Ellipsoid e{Vec3(18, 0, 55), Vec3(15, 22, 17.5)};
  const TriMesh m = generate_ellipsoid_mesh(e.center, e.semi_axes, subdiv);
  const double inner = std::pow(1.0 - icosphere_sagitta(subdiv), 2);
  gen::for_all(4000, 12, [&](gen::Rng& rng, int) {
    const Vec3 p = rng.vec_in(e.center - 1.3 * e.semi_axes, e.center + 1.3 * e.semi_axes);
    const double level = e.level(p);
    if (level < inner - 1e-9) {
      CHECK(point_in_mesh(m, p));
    } else if (level > 1.0 + 1e-9) {
      CHECK_FALSE(point_in_mesh(m, p));
    }
  });
}

TEST_CASE("icosphere sagitta bounds every face plane") {
  for (int s = 1; s <= 5; ++s) {
    const double sag = icosphere_sagitta(s);
    CHECK(sag > 0.0);
    CHECK(sag < 0.2);
    if (s > 1) CHECK(sag < icosphere_sagitta(s - 1));
    const TriMesh m = generate_ellipsoid_mesh(Vec3::Zero(), Vec3::Ones(), s);
    for (const auto& t : m.triangles) {
      const Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]).normalized();
      CHECK(n.dot(m.vertices[t[0]]) >= 1.0 - sag - 1e-12);
    }
  }
}

TEST_CASE("property: inside_length on a box equals the slab chord") {
  const Vec3 lo(-3, -2, -1), hi(4, 5, 6);
  const TriMesh m = box_mesh(lo, hi);
  gen::for_all(2000, 13, [&](gen::Rng& rng, int) {
    Segment s{rng.vec_in(Vec3::Constant(-8), Vec3::Constant(10)), rng.vec_in(Vec3::Constant(-8), Vec3::Constant(10))};
    const InsideLength il = inside_length(m, s);
    CHECK(il.length_mm == doctest::Approx(box_chord(lo, hi, s)).epsilon(1e-9).scale(1.0));
    CHECK(il.length_mm <= s.length() + 1e-12);
    for (std::size_t k = 1; k < il.intervals.size(); ++k) CHECK(il.intervals[k - 1].t1 <= il.intervals[k].t0);
  });
}

TEST_CASE("inside_length handles segments through edges, vertices and along faces") {
  const TriMesh m = box_mesh(Vec3::Zero(), Vec3(2, 2, 2));
  CHECK(inside_length(m, Segment{Vec3(-1, -1, -1), Vec3(3, 3, 3)}).length_mm == doctest::Approx(std::sqrt(12.0)));
  CHECK(inside_length(m, Segment{Vec3(-1, 1, 1), Vec3(3, 1, 1)}).length_mm == doctest::Approx(2.0));
  CHECK(inside_length(m, Segment{Vec3(1, 1, -1), Vec3(1, 1, 3)}).length_mm == doctest::Approx(2.0));
  CHECK(inside_length(m, Segment{Vec3(0.5, 0.5, 0.5), Vec3(1.5, 1.5, 1.5)}).length_mm == doctest::Approx(std::sqrt(3.0)));
  CHECK(inside_length(m, Segment{Vec3(5, 5, 5), Vec3(6, 6, 6)}).length_mm == 0.0);
  CHECK(inside_length(m, Segment{Vec3(1, 1, 1), Vec3(1, 1, 1)}).length_mm == 0.0);
}

TEST_CASE("property: ellipsoid mesh chord lies between the shell chords") {
  const Ellipsoid e{Vec3(18, 0, 55), Vec3(15, 22, 17.5)};
  const int subdiv = 3;
  const TriMesh m = generate_ellipsoid_mesh(e.center, e.semi_axes, subdiv);
  const double shrink = 1.0 - icosphere_sagitta(subdiv);
  const Ellipsoid inner{e.center, e.semi_axes * shrink};
  gen::for_all(1000, 14, [&](gen::Rng& rng, int) {
    const Segment s{rng.vec_in(e.center - 1.5 * e.semi_axes, e.center + 1.5 * e.semi_axes),
                    rng.vec_in(e.center - 1.5 * e.semi_axes, e.center + 1.5 * e.semi_axes)};
    const double len = inside_length(m, s).length_mm;
    CHECK(len <= oracle::ellipsoid_chord(e, s) + 1e-9);
    CHECK(len >= oracle::ellipsoid_chord(inner, s) - 1e-9);
  });
}

TEST_CASE("sphere diameter chord is within one percent of 2r") {
  const double r = 20.0;
  const TriMesh m = generate_ellipsoid_mesh(Vec3(1, 2, 3), Vec3::Constant(r), 3);
  for (const Vec3 dir : std::array<Vec3, 4>{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), Vec3(1, 1, 1).normalized()}) {
    const Segment s{Vec3(1, 2, 3) - 1.5 * r * dir, Vec3(1, 2, 3) + 1.5 * r * dir};
    CHECK(std::abs(inside_length(m, s).length_mm - 2 * r) / (2 * r) < 0.01);
  }
}

TEST_CASE("obj round trip and parse errors") {
  const TriMesh m = generate_ellipsoid_mesh(Vec3(1, 2, 3), Vec3(4, 5, 6), 2);
  std::stringstream buf;
  write_obj(m, buf);
  const TriMesh back = read_obj(buf);
  REQUIRE(back.vertices.size() == m.vertices.size());
  CHECK(back.triangles == m.triangles);
  for (std::size_t k = 0; k < m.vertices.size(); ++k) CHECK(back.vertices[k] == m.vertices[k]);

  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_obj(in);
  };
  const TriMesh slashed = parse("# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 3/2\n");
  CHECK(slashed.triangles.size() == 1);
  CHECK(code_of([&] { parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n"); }) == Errc::parse_error);
  CHECK(code_of([&] { parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n"); }) == Errc::parse_error);
  CHECK(code_of([&] { parse("v 0 0\n"); }) == Errc::parse_error);
  CHECK(code_of([&] { parse("v 0 0 0\nf a b c\n"); }) == Errc::parse_error);
  CHECK(code_of([&] { parse("v 0 0 0\n"); }) == Errc::parse_error);
  CHECK(code_of([] { load_obj("/nonexistent/mesh.obj"); }) == Errc::io_failure);
}

TEST_CASE("zone ids, names and validation") {
  CHECK(ZoneId(Apical::base, Side::right, Depth::medial).value() == 0);
  CHECK(ZoneId(Apical::apex, Side::left, Depth::lateral).value() == 11);
  CHECK(ZoneId(6).name() == "left mid medial");
  CHECK(ZoneId(1).name() == "right base lateral");
  CHECK(code_of([] { ZoneId(12); }) == Errc::invalid_argument);
  CHECK(code_of([] { ZoneId(-1); }) == Errc::invalid_argument);
  for (int v = 0; v < 12; ++v) {
    const ZoneId z(v);
    CHECK(ZoneId(z.cc(), z.side(), z.ml()) == z);
  }
  AxisAssignment dup;
  dup.side.axis = 2;
  CHECK(code_of([&] { dup.validate(); }) == Errc::invalid_argument);
  CHECK(code_of([] { build_zone_grid(Aabb{Vec3::Zero(), Vec3(1, 0, 1)}); }) == Errc::degenerate_geometry);
}

TEST_CASE("property: zone_of agrees with the interval oracle, boundaries included") {
  const Aabb box{Vec3(3, -22, 37.5), Vec3(33, 22, 72.5)};
  gen::for_all(64, 15, [&](gen::Rng& rng, int c) {
    AxisAssignment axes;
    const int perm[6][3] = {{2, 1, 0}, {2, 0, 1}, {1, 2, 0}, {1, 0, 2}, {0, 2, 1}, {0, 1, 2}};
    axes.cranio_caudal = {perm[c % 6][0], rng.coin()};
    axes.side = {perm[c % 6][1], rng.coin()};
    axes.medial_lateral = {perm[c % 6][2], rng.coin()};
    const ZoneGrid grid = build_zone_grid(box, axes);
    for (int n = 0; n < 300; ++n) {
      Vec3 p = rng.vec_in(box.min - Vec3::Constant(2), box.max + Vec3::Constant(2));
      // Snap some coordinates onto cell boundaries and box faces.
      for (int a = 0; a < 3; ++a) {
        if (rng.coin(0.3)) {
          const int cells = a == axes.cranio_caudal.axis ? 3 : 2;
          const int k = rng.integer(0, cells);
          const double len = box.max[a] - box.min[a];
          p[a] = rng.coin() ? box.min[a] + k * len / cells : box.max[a] - k * len / cells;
        }
      }
      const auto want = oracle::zone_by_intervals(box, axes, p);
      REQUIRE(want != std::optional<int>(-1));
      const auto got = zone_of_point(grid, p);
      CHECK(got.has_value() == want.has_value());
      if (got && want) CHECK(got->value() == *want);
    }
  });
}

TEST_CASE("zone cells tile the box") {
  const Aabb box{Vec3(0, 0, 0), Vec3(6, 4, 9)};
  AxisAssignment axes;
  axes.cranio_caudal.reversed = true;
  const ZoneGrid grid(box, axes);
  double total = 0.0;
  for (int z = 0; z < 12; ++z) {
    const Aabb cell = grid.cell_bounds(ZoneId(z));
    total += cell.volume();
    const auto at_center = grid.zone_of(cell.min + 0.5 * cell.extent());
    REQUIRE(at_center);
    CHECK(at_center->value() == z);
  }
  CHECK(total == doctest::Approx(box.volume()));
  // Reversed cranio-caudal: base sits at the high-z end.
  CHECK(grid.zone_of(Vec3(1, 1, 8.9))->cc() == Apical::base);
  CHECK(grid.zone_of(Vec3(1, 1, 0.1))->cc() == Apical::apex);
  CHECK(grid.zone_of(Vec3(1, 1, 0.0))->cc() == Apical::apex);
  CHECK(grid.zone_of(Vec3(1, 1, 9.0))->cc() == Apical::base);
  CHECK_FALSE(grid.zone_of(Vec3(1, 1, 9.0 + 1e-12)));
}

TEST_CASE("prostate model from mesh carries the mesh bounding box") {
  const TriMesh m = generate_ellipsoid_mesh(Vec3(18, 0, 55), Vec3(15, 22, 17.5), 3);
  const ProstateModel pm = ProstateModel::from_mesh(m);
  CHECK(pm.box.min.x() == doctest::Approx(3.0));
  CHECK(pm.box.max.y() == doctest::Approx(22.0));
  CHECK(pm.zones.box().max.z() == doctest::Approx(72.5));
  TriMesh bad = m;
  bad.triangles[0][0] = 100000;
  CHECK(code_of([&] { ProstateModel::from_mesh(bad); }) == Errc::invalid_argument);
}
