#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biopsym/anatomy.hpp"
#include "biopsym/probe.hpp"

namespace biopsym {

/// Spring-gun needle. The notch is the tissue-capturing segment, measured
/// back from the needle tip.
struct NeedleSpec {
  double throw_mm = 22.0;
  double notch_mm = 17.0;
  double notch_offset_mm = 3.0;

  void validate() const;
};

struct BiopsySample {
  int order_index = 0;
  ProbePose fire_pose{};
  double insertion_mm = 0.0;
  Segment segment{};  // p0 proximal, p1 distal end of the notch
  double inside_mm = 0.0;
  ZoneSet zones{};
  bool out_of_gland = true;
  std::int64_t timestamp_ms = 0;
};

struct Target {
  std::string id;
  Vec3 center{Vec3::Zero()};
  double radius_mm = 1.0;
};

struct TargetHit {
  std::string target_id;
  bool hit = false;
  std::optional<double> min_distance_mm;  // empty when nothing was fired
};

struct ProtocolResult {
  std::vector<BiopsySample> samples;
  double coverage = 0.0;
  ZoneSet zone_hit_map{};
  int out_of_gland_count = 0;
  double order_score = 1.0;
  std::vector<TargetHit> target_hits;
  double total_inside_mm = 0.0;
};

using CanonicalOrder = std::array<ZoneId, ZoneId::kCount>;

/// Right side base->apex (medial before lateral), then the left side.
CanonicalOrder default_canonical_order();

/// Throws Error{invalid_argument} unless the order is a permutation of 0..11.
void validate_canonical_order(std::span<const ZoneId> order);

struct SegmentScore {
  InsideLength inside;
  ZoneSet zones;
};

/// Intra-gland length of a notch segment and the zones it is credited with.
/// A zone counts only if an intra-gland sub-interval overlaps its cell with
/// positive length; the zone holding each sub-interval midpoint always counts.
SegmentScore score_segment(const ProstateModel& prostate, const Segment& notch);

/// Notch segment for a needle advanced insertion_mm along the guide before
/// the throw.
Segment notch_segment(const NeedleSpec& needle, const GuideLine& guide, double insertion_mm);

/// order_index, fire_pose and timestamp are left for the caller to fill.
/// Throws Error{invalid_argument} for a negative insertion.
BiopsySample fire_biopsy(const NeedleSpec& needle, const GuideLine& guide, double insertion_mm,
                         const ProstateModel& prostate);

/// Scores an ordered sequence of samples. order_score is the fraction of
/// concordant pairs among hit zones whose first-hit samples differ (Kendall
/// tau rescaled to [0, 1]); zones first hit by the same sample are tied and
/// skipped. With no comparable pair the score is 1.
ProtocolResult evaluate_protocol(std::span<const BiopsySample> samples, std::span<const ZoneId> canonical_order,
                                 std::span<const Target> targets);

double segment_point_distance(const Segment& seg, const Vec3& p);

struct AimSolution {
  ProbePose pose;
  double insertion_mm = 0.0;
};

/// Finds a pose and pre-fire insertion that put the point at notch_fraction
/// along the notch (0 = proximal end, 1 = distal end) on target, for a fixed
/// roll. Returns nothing when the kinematic limits cannot reach it.
std::optional<AimSolution> aim_needle(const ProbeSpec& probe, const NeedleSpec& needle, const Vec3& target,
                                      double notch_fraction = 0.5, double roll = 0.0,
                                      double insertion_hint_mm = 5.0);

}  // namespace biopsym

namespace biopsym {

/// Searches for a fire whose notch is credited with exactly one zone, with
/// at least min_inside_mm of gland tissue. Deterministic: candidates are
/// visited in a fixed order (aim points from the cell center outwards, then
/// notch fraction, roll and insertion). The returned pose survives a
/// device_pose_of/constrain_pose round trip with the same result.
std::optional<AimSolution> plan_zone_fire(const ProbeSpec& probe, const NeedleSpec& needle,
                                          const ProstateModel& prostate, ZoneId zone,
                                          double min_inside_mm = 2.0);

}  // namespace biopsym
