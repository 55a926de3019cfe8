#include "biopsym/scenario.hpp"

#include <fstream>
#include <set>

#include "biopsym/error.hpp"
#include "biopsym/json_io.hpp"

namespace biopsym {

void SliceConfig::validate() const {
  if (!(width_mm > 0.0) || !(height_mm > 0.0)) throw ValidationError("slice", "slice extents must be positive");
  if (px_w < 2 || px_h < 2 || px_w > 4096 || px_h > 4096)
    throw ValidationError("slice", "slice resolution must be within [2, 4096]");
  sector().validate();
}

SectorSpec SliceConfig::sector() const {
  SectorSpec s;
  s.fov_deg = fov_deg;
  s.r_min_mm = r_min_mm;
  s.r_max_mm = r_max_mm;
  s.apex_px = Vec2(px_w / 2.0, 0.0);
  s.direction_deg = 90.0;
  return s;
}

void Scenario::validate() const {
  if (id.empty()) throw ValidationError("id", "scenario id is empty");
  if (phantom.has_value() == volume_file.has_value())
    throw ValidationError("phantom", "scenario needs exactly one of phantom or volume");
  if (phantom) phantom->validate();
  if (volume_file && !std::filesystem::exists(*volume_file))
    throw Error(Errc::unknown_reference, "volume file not found: " + volume_file->string());
  if (prostate.mesh_file && !std::filesystem::exists(*prostate.mesh_file))
    throw Error(Errc::unknown_reference, "mesh file not found: " + prostate.mesh_file->string());
  if (!prostate.mesh_file) {
    if (!(prostate.ellipsoid.semi_axes.array() > 0.0).all())
      throw ValidationError("prostate.ellipsoid", "ellipsoid semi-axes must be positive");
    if (prostate.subdivisions < 1 || prostate.subdivisions > 6)
      throw ValidationError("prostate.subdivisions", "subdivisions must be within [1, 6]");
  }
  prostate.axes.validate();
  probe.validate();
  needle.validate();
  validate_canonical_order(canonical_order);
  std::set<std::string> target_ids;
  for (const auto& t : targets) {
    if (t.id.empty() || !target_ids.insert(t.id).second)
      throw ValidationError("targets", "target ids must be unique and non-empty");
    if (!(t.radius_mm > 0.0)) throw ValidationError("targets", "target radius must be positive");
  }
  slice.validate();
  if (!(default_insertion_mm >= 0.0)) throw ValidationError("default_insertion_mm", "default insertion must be >= 0");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& ref) {
  std::filesystem::path p(ref);
  return p.is_absolute() || base.empty() ? p : base / p;
}

Region region_from_json(const std::string& name, const json& j) {
  Region r;
  r.name = name;
  if (j.contains("sphere")) {
    const auto& s = j.at("sphere");
    r.shape = Sphere{s.at("center").get<Vec3>(), s.at("radius_mm").get<double>()};
  } else if (j.contains("box")) {
    Aabb b = j.at("box").get<Aabb>();
    b.validate();
    r.shape = b;
  } else {
    throw std::invalid_argument("region needs a sphere or a box");
  }
  return r;
}

json region_to_json(const Region& r) {
  if (const auto* s = std::get_if<Sphere>(&r.shape))
    return json{{"sphere", {{"center", s->center}, {"radius_mm", s->radius_mm}}}};
  return json{{"box", std::get<Aabb>(r.shape)}};
}

Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir) {
  Scenario s;
  s.id = j.at("id").get<std::string>();
  s.title = j.value("title", s.id);
  if (j.contains("phantom")) s.phantom = j.at("phantom").get<PhantomSpec>();
  if (j.contains("volume")) s.volume_file = resolve(base_dir, j.at("volume").get<std::string>());

  if (j.contains("prostate")) {
    const auto& p = j.at("prostate");
    if (p.contains("mesh")) {
      s.prostate.mesh_file = resolve(base_dir, p.at("mesh").get<std::string>());
    } else if (p.contains("ellipsoid")) {
      const auto& e = p.at("ellipsoid");
      s.prostate.ellipsoid.center = e.at("center").get<Vec3>();
      s.prostate.ellipsoid.semi_axes = e.at("semi_axes_mm").get<Vec3>();
    } else if (s.phantom) {
      s.prostate.ellipsoid = s.phantom->prostate;
    }
    s.prostate.subdivisions = p.value("subdivisions", s.prostate.subdivisions);
    if (p.contains("axes")) s.prostate.axes = p.at("axes").get<AxisAssignment>();
  } else if (s.phantom) {
    s.prostate.ellipsoid = s.phantom->prostate;
  }

  if (j.contains("probe")) s.probe = j.at("probe").get<ProbeSpec>();
  if (j.contains("needle")) s.needle = j.at("needle").get<NeedleSpec>();
  if (j.contains("canonical_order")) {
    const auto ids = j.at("canonical_order").get<std::vector<int>>();
    if (ids.size() != ZoneId::kCount) throw ValidationError("canonical_order", "canonical order must list 12 zones");
    for (std::size_t k = 0; k < ids.size(); ++k) s.canonical_order[k] = ZoneId(ids[k]);
  }
  if (j.contains("targets")) s.targets = j.at("targets").get<std::vector<Target>>();
  if (j.contains("assistance")) {
    s.allow_coronal = false;
    s.allow_3d = false;
    for (const auto& v : j.at("assistance")) {
      const auto name = v.get<std::string>();
      if (name == "coronal") {
        s.allow_coronal = true;
      } else if (name == "3d") {
        s.allow_3d = true;
      } else {
        throw ValidationError("assistance", "unknown assistance view: " + name);
      }
    }
  }
  s.patient_position = j.value("patient_position", s.patient_position);
  if (j.contains("slice")) {
    const auto& c = j.at("slice");
    s.slice.width_mm = c.value("width_mm", s.slice.width_mm);
    s.slice.height_mm = c.value("height_mm", s.slice.height_mm);
    s.slice.px_w = c.value("px_w", s.slice.px_w);
    s.slice.px_h = c.value("px_h", s.slice.px_h);
    s.slice.fov_deg = c.value("fov_deg", s.slice.fov_deg);
    s.slice.r_min_mm = c.value("r_min_mm", s.slice.r_min_mm);
    s.slice.r_max_mm = c.value("r_max_mm", s.slice.r_max_mm);
  }
  s.default_insertion_mm = j.value("default_insertion_mm", s.default_insertion_mm);

  if (s.phantom) s.regions["bladder"] = Region{"bladder", s.phantom->bladder};
  if (j.contains("regions")) {
    for (const auto& [name, r] : j.at("regions").items()) s.regions[name] = region_from_json(name, r);
  }
  return s;
}

}  // namespace

Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir) {
  Scenario s;
  try {
    s = parse_scenario(j, base_dir);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::parse_error, std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j{{"id", s.id}, {"title", s.title}};
  if (s.phantom) j["phantom"] = *s.phantom;
  if (s.volume_file) j["volume"] = s.volume_file->string();
  json p{{"axes", s.prostate.axes}, {"subdivisions", s.prostate.subdivisions}};
  if (s.prostate.mesh_file) {
    p["mesh"] = s.prostate.mesh_file->string();
  } else {
    p["ellipsoid"] = {{"center", s.prostate.ellipsoid.center}, {"semi_axes_mm", s.prostate.ellipsoid.semi_axes}};
  }
  j["prostate"] = p;
  j["probe"] = s.probe;
  j["needle"] = s.needle;
  json order = json::array();
  for (ZoneId z : s.canonical_order) order.push_back(z.value());
  j["canonical_order"] = order;
  j["targets"] = s.targets;
  json views = json::array();
  if (s.allow_coronal) views.push_back("coronal");
  if (s.allow_3d) views.push_back("3d");
  j["assistance"] = views;
  j["patient_position"] = s.patient_position;
  j["slice"] = {{"width_mm", s.slice.width_mm}, {"height_mm", s.slice.height_mm}, {"px_w", s.slice.px_w},
                {"px_h", s.slice.px_h},         {"fov_deg", s.slice.fov_deg},     {"r_min_mm", s.slice.r_min_mm},
                {"r_max_mm", s.slice.r_max_mm}};
  j["default_insertion_mm"] = s.default_insertion_mm;
  json regions = json::object();
  for (const auto& [name, r] : s.regions) regions[name] = region_to_json(r);
  j["regions"] = regions;
  return j;
}

std::array<double, 3> LoadedScenario::prostate_dims_mm() const {
  const Vec3 e = prostate->box.extent();
  const auto& axes = def.prostate.axes;
  return {e[axes.cranio_caudal.axis], e[axes.side.axis], e[axes.medial_lateral.axis]};
}

std::optional<Region> LoadedScenario::region(std::string_view name) const {
  if (const auto it = def.regions.find(name); it != def.regions.end()) return it->second;
  if (name == "prostate") return Region{"prostate", prostate->box};
  return std::nullopt;
}

namespace {

LoadedScenario build(Scenario def, std::shared_ptr<const UsVolume> volume) {
  LoadedScenario out;
  if (!volume) {
    volume = def.phantom ? std::make_shared<const UsVolume>(generate_phantom(*def.phantom))
                         : std::make_shared<const UsVolume>(load_volume(*def.volume_file));
  }
  out.volume = std::move(volume);
  TriMesh mesh = def.prostate.mesh_file
                     ? load_obj(*def.prostate.mesh_file)
                     : generate_ellipsoid_mesh(def.prostate.ellipsoid.center, def.prostate.ellipsoid.semi_axes,
                                               def.prostate.subdivisions);
  if (!is_closed_manifold(mesh)) throw Error(Errc::degenerate_geometry, "prostate mesh is not closed: " + def.id);
  out.prostate = std::make_shared<const ProstateModel>(ProstateModel::from_mesh(std::move(mesh), def.prostate.axes));
  out.def = std::move(def);
  return out;
}

}  // namespace

LoadedScenario load_scenario(Scenario def) {
  def.validate();
  return build(std::move(def), nullptr);
}

ScenarioCatalog ScenarioCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open scenario file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, "scenario file " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

ScenarioCatalog ScenarioCatalog::from_json(const json& j, const std::filesystem::path& base_dir) {
  ScenarioCatalog cat;
  // Scenarios on the same phantom share one volume.
  std::map<std::string, std::shared_ptr<const UsVolume>> volumes;
  const json& list = j.is_array() ? j : j.at("scenarios");
  for (const auto& item : list) {
    Scenario def = scenario_from_json(item, base_dir);
    if (cat.find(def.id)) throw ValidationError("id", "duplicate scenario id: " + def.id);
    const std::string key = def.phantom ? json(*def.phantom).dump() : "file:" + def.volume_file->string();
    auto& vol = volumes[key];
    LoadedScenario loaded = build(std::move(def), vol);
    vol = loaded.volume;
    cat.add(std::move(loaded));
  }
  return cat;
}

void ScenarioCatalog::add(LoadedScenario s) {
  if (find(s.def.id)) throw ValidationError("id", "duplicate scenario id: " + s.def.id);
  items_.push_back(std::make_shared<const LoadedScenario>(std::move(s)));
}

std::shared_ptr<const LoadedScenario> ScenarioCatalog::find(std::string_view id) const {
  for (const auto& s : items_) {
    if (s->def.id == id) return s;
  }
  return nullptr;
}

std::vector<ScriptStep> plan_protocol_script(const LoadedScenario& scenario, std::span<const ZoneId> order) {
  std::vector<ScriptStep> steps;
  for (ZoneId z : order) {
    const auto sol = plan_zone_fire(scenario.def.probe, scenario.def.needle, *scenario.prostate, z);
    if (!sol) throw Error(Errc::invariant_violation, "no single-zone fire reaches " + z.name());
    steps.push_back(ScriptStep{device_pose_of(scenario.def.probe, sol->pose), sol->insertion_mm, z});
  }
  return steps;
}

}  // namespace biopsym
