#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "biopsym/anatomy.hpp"
#include "biopsym/biopsy.hpp"
#include "biopsym/volume.hpp"

namespace biopsym {

struct PatientRecord {
  int age = 60;
  double psa = 0.0;                 // ng/mL
  double prostate_volume_cc = 30.0;
  bool dre_abnormal = false;

  /// Throws ValidationError naming the bad field.
  void validate() const;
};

enum class RiskBand { low, intermediate, high };

std::string_view to_string(RiskBand band);
std::optional<RiskBand> risk_band_from_string(std::string_view s);

/// Instructional PSA-density heuristic, not a clinical model.
struct RiskRules {
  double high_density = 0.15;  // density >= this (or abnormal DRE) -> high
  double low_psa = 4.0;        // psa < this and density < low_density -> low
  double low_density = 0.10;
};

struct RiskAssessment {
  double psa_density = 0.0;
  RiskBand band = RiskBand::intermediate;
  std::string rationale;
};

RiskAssessment risk_score(const PatientRecord& patient, const RiskRules& rules = {});

/// Answer grading for the questionnaire: exact band 1, adjacent band 0.5.
double grade_risk_answer(RiskBand expected, RiskBand answer);

/// Prolate ellipsoid estimate (pi/6) * L * W * H, returned in cc.
double ellipsoid_volume_cc(double length_mm, double width_mm, double height_mm);

/// A measurement drawn on a slice, in pixel coordinates.
struct Caliper {
  Vec2 a_px{Vec2::Zero()};
  Vec2 b_px{Vec2::Zero()};
  double mm_per_px_u = 1.0;
  double mm_per_px_v = 1.0;

  double length_mm() const;
};

struct VolumeGrade {
  double score = 0.0;
  std::array<double, 3> measured_mm{};
  std::array<double, 3> relative_error{};
};

/// true_dims and calipers are ordered length, width, height. Each axis earns
/// max(0, 1 - |rel_err| / tolerance); the score is the mean.
VolumeGrade grade_volume_estimate(const std::array<double, 3>& true_dims_mm, std::span<const Caliper> calipers,
                                  double tolerance = 0.25);

struct Region {
  std::string name;
  std::variant<Sphere, Aabb> shape;

  /// 0 inside, Euclidean distance to the region otherwise.
  double distance(const Vec3& p) const;
};

/// 1 inside the region, linear falloff to 0 at tau_mm outside.
double grade_localization(const Region& region, const Vec3& point, double tau_mm = 10.0);

struct SimulationWeights {
  double coverage = 0.6;
  double order = 0.2;
  double in_gland = 0.1;
  double targets = 0.1;

  /// Throws ValidationError unless the weights are non-negative and sum to 1.
  void validate() const;
};

/// Weighted protocol grade. Without targets the remaining weights are
/// renormalized over their own mass.
double grade_simulation(const ProtocolResult& result, const SimulationWeights& weights = {});

enum class ExerciseKind { questionnaire, volume_estimate, structure_localization, guided_simulation };

std::string_view to_string(ExerciseKind kind);
std::optional<ExerciseKind> exercise_kind_from_string(std::string_view s);

struct ExerciseConstraints {
  bool coronal_view = false;
  bool view_3d = false;
  std::string patient_position = "left_lateral_decubitus";
  bool extra_targets = false;
};

struct GradingParams {
  double caliper_tolerance = 0.25;
  double tau_mm = 10.0;
  SimulationWeights weights{};
  std::string region = "bladder";
};

struct ExerciseDef {
  std::string id;
  ExerciseKind kind = ExerciseKind::questionnaire;
  std::string title;
  std::string scenario_id;  // required for every kind except questionnaire
  ExerciseConstraints constraints{};
  GradingParams grading{};
  ZoneSet focus_zones{};     // zones a simulation drill concentrates on

  void validate() const;
};

struct Attempt {
  std::string attempt_id;
  std::string user_id;
  std::string exercise_id;
  ExerciseKind kind = ExerciseKind::questionnaire;
  std::int64_t timestamp_ms = 0;
  nlohmann::json inputs = nlohmann::json::object();
  double score = 0.0;
  nlohmann::json detail = nlohmann::json::object();

  friend bool operator==(const Attempt&, const Attempt&) = default;
};

struct RecommendationConfig {
  int window = 5;                    // most recent guided simulations considered
  double zone_hit_threshold = 0.5;   // zones hit less often are weak
  double volume_threshold = 0.7;     // mean volume-estimate score below this is weak
  std::vector<std::string> beginner_sequence;
};

struct ContentItem {
  std::string id;
  std::string title;
  std::string kind;  // "slideshow" | "lecture"
};

struct ExerciseCatalog {
  std::vector<ExerciseDef> exercises;
  RiskRules risk_rules{};
  RecommendationConfig recommendation{};
  std::vector<ContentItem> content;

  const ExerciseDef* find(std::string_view id) const;
  void validate() const;
};

/// Zone hit map recorded in a guided-simulation attempt's detail
/// ("zone_hit_map": 12 booleans).
std::optional<ZoneSet> attempt_zone_hits(const Attempt& attempt);

/// Deterministic weakness-driven recommendations. Empty history yields the
/// configured beginner sequence; no detected weakness yields an empty list.
std::vector<std::string> recommend_exercises(std::span<const Attempt> history, const ExerciseCatalog& catalog);

}  // namespace biopsym
