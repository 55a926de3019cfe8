#include "biopsym/exercises.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "biopsym/error.hpp"

namespace biopsym {

void PatientRecord::validate() const {
  if (age < 18 || age > 120) throw ValidationError("age", "age must be in [18, 120]");
  if (!(psa >= 0.0) || !std::isfinite(psa)) throw ValidationError("psa", "psa must be >= 0");
  if (!(prostate_volume_cc > 0.0) || !std::isfinite(prostate_volume_cc)) {
    throw ValidationError("prostate_volume_cc", "prostate volume must be > 0");
  }
}

std::string_view to_string(RiskBand band) {
  switch (band) {
    case RiskBand::low: return "low";
    case RiskBand::intermediate: return "intermediate";
    case RiskBand::high: return "high";
  }
  return "intermediate";
}

std::optional<RiskBand> risk_band_from_string(std::string_view s) {
  if (s == "low") return RiskBand::low;
  if (s == "intermediate") return RiskBand::intermediate;
  if (s == "high") return RiskBand::high;
  return std::nullopt;
}

RiskAssessment risk_score(const PatientRecord& patient, const RiskRules& rules) {
  patient.validate();
  RiskAssessment out;
  out.psa_density = patient.psa / patient.prostate_volume_cc;

  std::ostringstream why;
  why.precision(3);
  why << "PSA density " << out.psa_density << " ng/mL/cc";
  if (out.psa_density >= rules.high_density || patient.dre_abnormal) {
    out.band = RiskBand::high;
    if (patient.dre_abnormal) why << "; abnormal DRE";
    if (out.psa_density >= rules.high_density) why << " >= " << rules.high_density;
  } else if (patient.psa < rules.low_psa && out.psa_density < rules.low_density) {
    out.band = RiskBand::low;
    why << " < " << rules.low_density << " with PSA " << patient.psa << " < " << rules.low_psa << " and normal DRE";
  } else {
    out.band = RiskBand::intermediate;
    why << " between the low and high rules";
  }
  out.rationale = why.str();
  return out;
}

double grade_risk_answer(RiskBand expected, RiskBand answer) {
  const int gap = std::abs(static_cast<int>(expected) - static_cast<int>(answer));
  return gap == 0 ? 1.0 : gap == 1 ? 0.5 : 0.0;
}

double ellipsoid_volume_cc(double length_mm, double width_mm, double height_mm) {
  if (!(length_mm > 0.0)) throw ValidationError("length_mm", "length must be > 0");
  if (!(width_mm > 0.0)) throw ValidationError("width_mm", "width must be > 0");
  if (!(height_mm > 0.0)) throw ValidationError("height_mm", "height must be > 0");
  return std::numbers::pi / 6.0 * length_mm * width_mm * height_mm / 1000.0;
}

double Caliper::length_mm() const {
  return std::hypot((b_px.x() - a_px.x()) * mm_per_px_u, (b_px.y() - a_px.y()) * mm_per_px_v);
}

VolumeGrade grade_volume_estimate(const std::array<double, 3>& true_dims_mm, std::span<const Caliper> calipers,
                                  double tolerance) {
  static constexpr std::array<const char*, 3> kAxis{"length", "width", "height"};
  if (calipers.size() != 3) {
    throw ValidationError("calipers", "expected 3 calipers (length, width, height), got " +
                                          std::to_string(calipers.size()));
  }
  if (!(tolerance > 0.0)) throw ValidationError("tolerance", "caliper tolerance must be > 0");
  VolumeGrade grade;
  double sum = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(true_dims_mm[a] > 0.0)) throw ValidationError(kAxis[a], "true dimension must be > 0");
    const Caliper& c = calipers[a];
    if (!(c.mm_per_px_u > 0.0 && c.mm_per_px_v > 0.0)) {
      throw ValidationError(std::string("calipers[") + std::to_string(a) + "]", "pixel spacing must be > 0");
    }
    grade.measured_mm[a] = c.length_mm();
    grade.relative_error[a] = (grade.measured_mm[a] - true_dims_mm[a]) / true_dims_mm[a];
    sum += std::max(0.0, 1.0 - std::abs(grade.relative_error[a]) / tolerance);
  }
  grade.score = sum / 3.0;
  return grade;
}

double Region::distance(const Vec3& p) const {
  if (const auto* s = std::get_if<Sphere>(&shape)) return std::max(0.0, (p - s->center).norm() - s->radius_mm);
  const auto& box = std::get<Aabb>(shape);
  const Vec3 outside = (box.min - p).cwiseMax(p - box.max).cwiseMax(0.0);
  return outside.norm();
}

double grade_localization(const Region& region, const Vec3& point, double tau_mm) {
  if (!(tau_mm > 0.0)) throw ValidationError("tau_mm", "localization falloff must be > 0");
  if (!point.allFinite()) throw ValidationError("point", "point must be finite");
  const double d = region.distance(point);
  if (d == 0.0) return 1.0;
  return std::max(0.0, 1.0 - d / tau_mm);
}

void SimulationWeights::validate() const {
  for (double w : {coverage, order, in_gland, targets}) {
    if (!(w >= 0.0)) throw ValidationError("weights", "weights must be >= 0");
  }
  if (std::abs(coverage + order + in_gland + targets - 1.0) > 1e-9) {
    throw ValidationError("weights", "weights must sum to 1");
  }
}

double grade_simulation(const ProtocolResult& result, const SimulationWeights& weights) {
  weights.validate();
  const auto n = result.samples.size();
  const double in_gland = n == 0 ? 1.0 : 1.0 - static_cast<double>(result.out_of_gland_count) / static_cast<double>(n);

  double score = weights.coverage * result.coverage + weights.order * result.order_score + weights.in_gland * in_gland;
  double mass = weights.coverage + weights.order + weights.in_gland;
  if (!result.target_hits.empty()) {
    const auto hits = std::count_if(result.target_hits.begin(), result.target_hits.end(),
                                    [](const TargetHit& h) { return h.hit; });
    score += weights.targets * static_cast<double>(hits) / static_cast<double>(result.target_hits.size());
    mass += weights.targets;
  }
  if (mass <= 0.0) return 0.0;
  return std::clamp(score / mass, 0.0, 1.0);
}

std::string_view to_string(ExerciseKind kind) {
  switch (kind) {
    case ExerciseKind::questionnaire: return "questionnaire";
    case ExerciseKind::volume_estimate: return "volume_estimate";
    case ExerciseKind::structure_localization: return "structure_localization";
    case ExerciseKind::guided_simulation: return "guided_simulation";
  }
  return "questionnaire";
}

std::optional<ExerciseKind> exercise_kind_from_string(std::string_view s) {
  for (auto k : {ExerciseKind::questionnaire, ExerciseKind::volume_estimate, ExerciseKind::structure_localization,
                 ExerciseKind::guided_simulation}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

void ExerciseDef::validate() const {
  if (id.empty()) throw ValidationError("id", "exercise id must not be empty");
  if (kind != ExerciseKind::questionnaire && scenario_id.empty()) {
    throw ValidationError("scenario", "exercise " + id + " needs a scenario");
  }
  switch (kind) {
    case ExerciseKind::volume_estimate:
      if (!(grading.caliper_tolerance > 0.0)) throw ValidationError("grading.caliper_tolerance", "must be > 0");
      break;
    case ExerciseKind::structure_localization:
      if (grading.region.empty()) throw ValidationError("grading.region", "localization needs a region");
      if (!(grading.tau_mm > 0.0)) throw ValidationError("grading.tau_mm", "must be > 0");
      break;
    case ExerciseKind::guided_simulation:
      grading.weights.validate();
      break;
    case ExerciseKind::questionnaire:
      break;
  }
}

const ExerciseDef* ExerciseCatalog::find(std::string_view id) const {
  auto it = std::find_if(exercises.begin(), exercises.end(), [&](const ExerciseDef& e) { return e.id == id; });
  return it == exercises.end() ? nullptr : &*it;
}

void ExerciseCatalog::validate() const {
  std::map<std::string, int> seen;
  for (const auto& e : exercises) {
    e.validate();
    if (seen[e.id]++ > 0) throw ValidationError("exercises", "duplicate exercise id " + e.id);
  }
  for (const auto& id : recommendation.beginner_sequence) {
    if (!find(id)) throw ValidationError("recommendation.beginner_sequence", "unknown exercise " + id);
  }
  if (recommendation.window < 1) throw ValidationError("recommendation.window", "window must be >= 1");
}

std::optional<ZoneSet> attempt_zone_hits(const Attempt& attempt) {
  if (attempt.kind != ExerciseKind::guided_simulation) return std::nullopt;
  const auto it = attempt.detail.find("zone_hit_map");
  if (it == attempt.detail.end() || !it->is_array() || it->size() != ZoneId::kCount) return std::nullopt;
  ZoneSet hits;
  for (int z = 0; z < ZoneId::kCount; ++z) {
    const auto& v = (*it)[static_cast<std::size_t>(z)];
    if (!v.is_boolean()) return std::nullopt;
    hits.set(static_cast<std::size_t>(z), v.get<bool>());
  }
  return hits;
}

std::vector<std::string> recommend_exercises(std::span<const Attempt> history, const ExerciseCatalog& catalog) {
  const auto& cfg = catalog.recommendation;
  if (history.empty()) return cfg.beginner_sequence;

  std::vector<const Attempt*> ordered;
  for (const auto& a : history) ordered.push_back(&a);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Attempt* x, const Attempt* y) { return x->timestamp_ms < y->timestamp_ms; });

  // Most recent first.
  std::vector<ZoneSet> recent_sims;
  std::vector<double> recent_volume;
  for (auto it = ordered.rbegin(); it != ordered.rend(); ++it) {
    const Attempt& a = **it;
    if (static_cast<int>(recent_sims.size()) < cfg.window) {
      if (auto hits = attempt_zone_hits(a)) recent_sims.push_back(*hits);
    }
    if (a.kind == ExerciseKind::volume_estimate && static_cast<int>(recent_volume.size()) < cfg.window) {
      recent_volume.push_back(a.score);
    }
  }

  std::map<std::string, double> priority;  // lower = more urgent
  auto propose = [&priority](const std::string& id, double p) {
    auto [it, inserted] = priority.emplace(id, p);
    if (!inserted) it->second = std::min(it->second, p);
  };

  if (!recent_sims.empty()) {
    std::array<double, ZoneId::kCount> rate{};
    for (const auto& hits : recent_sims) {
      for (int z = 0; z < ZoneId::kCount; ++z) rate[z] += hits.test(static_cast<std::size_t>(z)) ? 1.0 : 0.0;
    }
    ZoneSet weak;
    for (int z = 0; z < ZoneId::kCount; ++z) {
      rate[z] /= static_cast<double>(recent_sims.size());
      if (rate[z] < cfg.zone_hit_threshold) weak.set(static_cast<std::size_t>(z));
    }
    if (weak.any()) {
      const double mean_rate = std::accumulate(rate.begin(), rate.end(), 0.0) / ZoneId::kCount;
      for (const auto& e : catalog.exercises) {
        if (e.kind == ExerciseKind::guided_simulation) {
          const ZoneSet overlap = e.focus_zones & weak;
          if (overlap.none()) continue;
          double worst = 1.0;
          for (ZoneId z : zones_in(overlap)) worst = std::min(worst, rate[z.value()]);
          propose(e.id, worst);
        } else if (e.kind == ExerciseKind::structure_localization) {
          propose(e.id, mean_rate);
        }
      }
    }
  }

  if (!recent_volume.empty()) {
    const double mean = std::accumulate(recent_volume.begin(), recent_volume.end(), 0.0) /
                        static_cast<double>(recent_volume.size());
    if (mean < cfg.volume_threshold) {
      for (const auto& e : catalog.exercises) {
        if (e.kind == ExerciseKind::volume_estimate) propose(e.id, mean);
      }
    }
  }

  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [id, p] : priority) ranked.emplace_back(p, id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (auto& [p, id] : ranked) out.push_back(std::move(id));
  return out;
}

}  // namespace biopsym
