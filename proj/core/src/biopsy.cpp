#include "biopsym/biopsy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "biopsym/error.hpp"

namespace biopsym {

void NeedleSpec::validate() const {
  constexpr double tol = 1e-9;
  if (!(throw_mm > 0.0)) throw Error(Errc::invalid_argument, "needle throw must be positive");
  if (!(notch_mm > 0.0)) throw Error(Errc::invalid_argument, "needle notch must be positive");
  if (!(notch_offset_mm >= 0.0)) throw Error(Errc::invalid_argument, "needle notch offset must be >= 0");
  if (notch_offset_mm + notch_mm > throw_mm + tol) {
    throw Error(Errc::invalid_argument, "notch offset + notch length must not exceed the throw");
  }
}

CanonicalOrder default_canonical_order() {
  CanonicalOrder order{};
  std::size_t n = 0;
  for (Side side : {Side::right, Side::left}) {
    for (Apical cc : {Apical::base, Apical::mid, Apical::apex}) {
      for (Depth ml : {Depth::medial, Depth::lateral}) order[n++] = ZoneId(cc, side, ml);
    }
  }
  return order;
}

void validate_canonical_order(std::span<const ZoneId> order) {
  if (order.size() != ZoneId::kCount) throw Error(Errc::invalid_argument, "canonical order must list 12 zones");
  ZoneSet seen;
  for (ZoneId z : order) {
    if (seen.test(static_cast<std::size_t>(z.value()))) {
      throw Error(Errc::invalid_argument, "canonical order repeats zone " + std::to_string(z.value()));
    }
    seen.set(static_cast<std::size_t>(z.value()));
  }
}

namespace {

// Parameter range of seg(t), t in [t0, t1], inside the box; empty if hi <= lo.
std::pair<double, double> clip_to_box(const Segment& seg, double t0, double t1, const Aabb& box) {
  double lo = t0;
  double hi = t1;
  const Vec3 d = seg.p1 - seg.p0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (seg.p0[a] < box.min[a] || seg.p0[a] > box.max[a]) return {1.0, 0.0};
      continue;
    }
    double ta = (box.min[a] - seg.p0[a]) / d[a];
    double tb = (box.max[a] - seg.p0[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    lo = std::max(lo, ta);
    hi = std::min(hi, tb);
  }
  return {lo, hi};
}

}  // namespace

SegmentScore score_segment(const ProstateModel& prostate, const Segment& notch) {
  constexpr double kMinOverlapMm = 1e-9;
  SegmentScore score;
  score.inside = inside_length(prostate.mesh, notch);
  const double len = notch.length();
  for (const auto& iv : score.inside.intervals) {
    if (auto z = prostate.zones.zone_of(notch.at(0.5 * (iv.t0 + iv.t1)))) {
      score.zones.set(static_cast<std::size_t>(z->value()));
    }
    for (int zi = 0; zi < ZoneId::kCount; ++zi) {
      const auto [lo, hi] = clip_to_box(notch, iv.t0, iv.t1, prostate.zones.cell_bounds(ZoneId(zi)));
      if ((hi - lo) * len > kMinOverlapMm) score.zones.set(static_cast<std::size_t>(zi));
    }
  }
  return score;
}

Segment notch_segment(const NeedleSpec& needle, const GuideLine& guide, double insertion_mm) {
  const Vec3 tip = guide.at(insertion_mm + needle.throw_mm);
  return Segment{tip - (needle.notch_offset_mm + needle.notch_mm) * guide.direction,
                 tip - needle.notch_offset_mm * guide.direction};
}

BiopsySample fire_biopsy(const NeedleSpec& needle, const GuideLine& guide, double insertion_mm,
                         const ProstateModel& prostate) {
  if (!(insertion_mm >= 0.0)) throw Error(Errc::invalid_argument, "needle insertion must be >= 0");
  BiopsySample sample;
  sample.insertion_mm = insertion_mm;
  sample.segment = notch_segment(needle, guide, insertion_mm);
  const SegmentScore score = score_segment(prostate, sample.segment);
  sample.inside_mm = std::clamp(score.inside.length_mm, 0.0, needle.notch_mm);
  sample.out_of_gland = sample.inside_mm == 0.0;
  sample.zones = sample.out_of_gland ? ZoneSet{} : score.zones;
  return sample;
}

ProtocolResult evaluate_protocol(std::span<const BiopsySample> samples, std::span<const ZoneId> canonical_order,
                                 std::span<const Target> targets) {
  validate_canonical_order(canonical_order);

  ProtocolResult result;
  result.samples.assign(samples.begin(), samples.end());

  std::array<int, ZoneId::kCount> rank{};
  for (std::size_t i = 0; i < canonical_order.size(); ++i) rank[canonical_order[i].value()] = static_cast<int>(i);

  std::array<int, ZoneId::kCount> first_hit;
  first_hit.fill(-1);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& sample = samples[s];
    if (sample.out_of_gland) ++result.out_of_gland_count;
    result.total_inside_mm += sample.inside_mm;
    for (ZoneId z : zones_in(sample.zones)) {
      if (first_hit[z.value()] < 0) first_hit[z.value()] = static_cast<int>(s);
    }
    result.zone_hit_map |= sample.zones;
  }
  result.coverage = static_cast<double>(result.zone_hit_map.count()) / ZoneId::kCount;

  long concordant = 0;
  long discordant = 0;
  for (int a = 0; a < ZoneId::kCount; ++a) {
    for (int b = a + 1; b < ZoneId::kCount; ++b) {
      if (first_hit[a] < 0 || first_hit[b] < 0 || first_hit[a] == first_hit[b]) continue;
      if ((first_hit[a] < first_hit[b]) == (rank[a] < rank[b])) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  result.order_score =
      concordant + discordant == 0 ? 1.0 : static_cast<double>(concordant) / static_cast<double>(concordant + discordant);

  for (const auto& target : targets) {
    TargetHit hit{target.id, false, std::nullopt};
    for (const auto& sample : samples) {
      const double d = segment_point_distance(sample.segment, target.center);
      if (!hit.min_distance_mm || d < *hit.min_distance_mm) hit.min_distance_mm = d;
    }
    hit.hit = hit.min_distance_mm && *hit.min_distance_mm <= target.radius_mm;
    result.target_hits.push_back(std::move(hit));
  }
  return result;
}

double segment_point_distance(const Segment& seg, const Vec3& p) {
  const Vec3 d = seg.p1 - seg.p0;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - seg.p0).norm();
  const double t = std::clamp((p - seg.p0).dot(d) / len2, 0.0, 1.0);
  return (p - seg.at(t)).norm();
}

std::optional<AimSolution> aim_needle(const ProbeSpec& probe, const NeedleSpec& needle, const Vec3& target,
                                      double notch_fraction, double roll, double insertion_hint_mm) {
  const double g = deg_to_rad(probe.guide_angle_deg);
  const double sin_g = std::sin(g);
  const double cos_g = std::cos(g);
  const Vec3 t = target - probe.pivot;
  const double t2 = t.squaredNorm();

  // Distance along the guide from its origin to the aimed notch point, minus
  // the pre-fire insertion.
  const double notch_point = needle.throw_mm - needle.notch_offset_mm - needle.notch_mm + notch_fraction * needle.notch_mm;
  const double base = probe.tip_offset_mm + probe.guide_offset_mm;

  // The aimed point sits at local (m sin g, 0, base + depth + m cos g); its
  // distance from the pivot must equal |t|.
  double m = std::max(0.0, insertion_hint_mm) + notch_point;
  const double disc = t2 - m * m * sin_g * sin_g;
  if (disc < 0.0) return std::nullopt;
  double depth = std::sqrt(disc) - base - m * cos_g;
  if (depth < 0.0 || depth > probe.d_max_mm) {
    depth = std::clamp(depth, 0.0, probe.d_max_mm);
    const double k = base + depth;
    const double disc2 = t2 - k * k * sin_g * sin_g;
    if (disc2 < 0.0) return std::nullopt;
    m = -k * cos_g + std::sqrt(disc2);
  }
  const double insertion = m - notch_point;
  if (insertion < 0.0) return std::nullopt;

  const Vec3 local(m * sin_g, 0.0, base + depth + m * cos_g);
  const Vec3 w = Eigen::AngleAxisd(roll, Vec3::UnitZ()) * local;

  // Ry(pitch) must bring w.x to t.x: A cos p + B sin p = t.x.
  const double a = w.x();
  const double b = w.z();
  const double rho = std::hypot(a, b);
  if (rho == 0.0 || std::abs(t.x()) > rho) return std::nullopt;
  const double phi = std::atan2(b, a);
  const double delta = std::acos(std::clamp(t.x() / rho, -1.0, 1.0));
  const double pitch_limit = deg_to_rad(probe.pitch_limit_deg);
  const double yaw_limit = deg_to_rad(probe.yaw_limit_deg);

  std::optional<AimSolution> best;
  for (double pitch : {wrap_angle(phi - delta), wrap_angle(phi + delta)}) {
    if (std::abs(pitch) > pitch_limit) continue;
    const double y1 = w.y();
    const double z1 = -a * std::sin(pitch) + b * std::cos(pitch);
    const double yaw = wrap_angle(std::atan2(z1, y1) - std::atan2(t.z(), t.y()));
    if (std::abs(yaw) > yaw_limit) continue;
    ProbePose pose{depth, pitch, yaw, wrap_angle(roll)};
    const Vec3 hit = guide_line_of(probe, pose).at(m);
    if ((hit - target).norm() > 1e-6) continue;
    if (!best || std::abs(pitch) < std::abs(best->pose.pitch)) best = AimSolution{pose, insertion};
  }
  return best;
}

}  // namespace biopsym
