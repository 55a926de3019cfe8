#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "biopsym/anatomy.hpp"
#include "biopsym/biopsy.hpp"
#include "biopsym/exercises.hpp"
#include "biopsym/probe.hpp"
#include "biopsym/volume.hpp"

namespace biopsym {

/// Live image geometry. The sector apex sits at the top-centre of the frame
/// (the probe tip) and opens along increasing rows.
struct SliceConfig {
  double width_mm = 80.0;
  double height_mm = 80.0;
  int px_w = 256;
  int px_h = 256;
  double fov_deg = 140.0;
  double r_min_mm = 0.0;
  double r_max_mm = 80.0;

  void validate() const;
  SectorSpec sector() const;
};

/// Gland surface: an analytic ellipsoid tessellated at load time, or a mesh file.
struct ProstateSource {
  std::optional<std::filesystem::path> mesh_file;
  Ellipsoid ellipsoid{Vec3(18.0, 0.0, 55.0), Vec3(15.0, 22.0, 17.5)};
  int subdivisions = 3;
  AxisAssignment axes{};
};

struct Scenario {
  std::string id;
  std::string title;
  std::optional<PhantomSpec> phantom;                   // exactly one of phantom
  std::optional<std::filesystem::path> volume_file;     // and volume_file
  ProstateSource prostate{};
  ProbeSpec probe{};
  NeedleSpec needle{};
  CanonicalOrder canonical_order = default_canonical_order();
  std::vector<Target> targets;
  bool allow_coronal = true;
  bool allow_3d = true;
  std::string patient_position = "left_lateral_decubitus";
  SliceConfig slice{};
  double default_insertion_mm = 5.0;
  std::map<std::string, Region, std::less<>> regions;  // analytic structures for localization

  /// Throws Error{invalid_argument} or ValidationError on bad content and
  /// Error{unknown_reference} when a referenced file is missing.
  void validate() const;
};

/// Relative file references are resolved against base_dir.
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json scenario_to_json(const Scenario& s);

/// A scenario with its volume and gland model built. Immutable and shared
/// by every session on the scenario.
struct LoadedScenario {
  Scenario def;
  std::shared_ptr<const UsVolume> volume;
  std::shared_ptr<const ProstateModel> prostate;

  /// Gland length, width, height: the box extents along the cranio-caudal,
  /// side and medial-lateral axes.
  std::array<double, 3> prostate_dims_mm() const;
  /// Named analytic region; "prostate" falls back to the gland box.
  std::optional<Region> region(std::string_view name) const;
};

LoadedScenario load_scenario(Scenario def);

class ScenarioCatalog {
 public:
  ScenarioCatalog() = default;

  /// {"scenarios": [...]} file; relative references resolve next to it.
  static ScenarioCatalog load(const std::filesystem::path& path);
  static ScenarioCatalog from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

  void add(LoadedScenario s);
  std::shared_ptr<const LoadedScenario> find(std::string_view id) const;
  std::vector<std::shared_ptr<const LoadedScenario>> list() const { return items_; }

 private:
  std::vector<std::shared_ptr<const LoadedScenario>> items_;
};

/// One step of a scripted run: move to pose, then fire.
struct ScriptStep {
  DevicePose pose;
  double insertion_mm = 0.0;
  ZoneId zone;
};

/// Single-zone fires for each zone in order. Throws Error{invariant_violation}
/// if some zone cannot be reached with a single-zone core.
std::vector<ScriptStep> plan_protocol_script(const LoadedScenario& scenario, std::span<const ZoneId> order);

}  // namespace biopsym
