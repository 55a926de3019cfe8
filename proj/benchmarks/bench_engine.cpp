#include <benchmark/benchmark.h>

#include <random>

#include "biopsym/anatomy.hpp"
#include "biopsym/biopsy.hpp"
#include "biopsym/volume.hpp"

using namespace biopsym;

namespace {

const UsVolume& volume(int n) {
  static const UsVolume v128 = generate_phantom(PhantomSpec::standard(1, 128));
  static const UsVolume v256 = generate_phantom(PhantomSpec::standard(1, 256));
  return n == 128 ? v128 : v256;
}

SlicePlane oblique_plane(int px) {
  SlicePlane p;
  p.u_axis = Vec3(1, 1, 0).normalized();
  p.v_axis = Vec3(-0.3, 0.3, 1).normalized();
  p.center = Vec3(18, 0, 55);
  p.width_mm = p.height_mm = 80.0;
  p.px_w = p.px_h = px;
  return p;
}

std::vector<Vec3> random_points(std::size_t n, const Vec3& lo, const Vec3& hi) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = lo + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(hi - lo);
  return pts;
}

}  // namespace

// Args: volume edge, slice edge in pixels.
static void BM_ExtractSlice(benchmark::State& state) {
  const UsVolume& vol = volume(static_cast<int>(state.range(0)));
  const SlicePlane plane = oblique_plane(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_slice(vol, plane));
  state.SetItemsProcessed(state.iterations() * state.range(1) * state.range(1));
}
BENCHMARK(BM_ExtractSlice)->Args({128, 256})->Args({256, 256})->Args({256, 512})->Unit(benchmark::kMillisecond);

static void BM_SampleTrilinear(benchmark::State& state) {
  const UsVolume& vol = volume(128);
  const auto pts = random_points(4096, Vec3(-30, -50, 12), Vec3(70, 50, 110));
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_trilinear(vol, pts[k++ & 4095]));
}
BENCHMARK(BM_SampleTrilinear);

static void BM_PointInMesh(benchmark::State& state) {
  const TriMesh mesh = generate_ellipsoid_mesh(Vec3(18, 0, 55), Vec3(15, 22, 17.5), static_cast<int>(state.range(0)));
  const auto pts = random_points(4096, Vec3(0, -25, 35), Vec3(36, 25, 75));
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(point_in_mesh(mesh, pts[k++ & 4095]));
}
BENCHMARK(BM_PointInMesh)->Arg(3)->Arg(5);

static void BM_ScoreSegment(benchmark::State& state) {
  AxisAssignment axes;
  axes.cranio_caudal.reversed = true;
  const ProstateModel pm =
      ProstateModel::from_mesh(generate_ellipsoid_mesh(Vec3(18, 0, 55), Vec3(15, 22, 17.5), 3), axes);
  const auto a = random_points(1024, Vec3(0, -25, 35), Vec3(36, 25, 75));
  const auto b = random_points(1024, Vec3(0, -25, 35), Vec3(36, 25, 75));
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_segment(pm, Segment{a[k & 1023], b[k & 1023]}));
    ++k;
  }
}
BENCHMARK(BM_ScoreSegment);

static void BM_ZoneOf(benchmark::State& state) {
  const ZoneGrid grid = build_zone_grid(Aabb{Vec3(3, -22, 37.5), Vec3(33, 22, 72.5)});
  const auto pts = random_points(4096, Vec3(2, -23, 36), Vec3(34, 23, 74));
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(grid.zone_of(pts[k++ & 4095]));
}
BENCHMARK(BM_ZoneOf);

static void BM_GeneratePhantom(benchmark::State& state) {
  const PhantomSpec spec = PhantomSpec::standard(3, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(generate_phantom(spec));
}
BENCHMARK(BM_GeneratePhantom)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
