#include "biopsym/json_io.hpp"

#include <cmath>
#include <limits>

#include "biopsym/error.hpp"

namespace biopsym {

json zones_to_json(const ZoneSet& zones) {
  json out = json::array();
  for (ZoneId z : zones_in(zones)) out.push_back(z.value());
  return out;
}

ZoneSet zones_from_json(const json& j) {
  ZoneSet out;
  for (const auto& v : j) out.set(static_cast<std::size_t>(ZoneId(v.get<int>()).value()));
  return out;
}

json zone_map_to_json(const ZoneSet& zones) {
  json out = json::array();
  for (int z = 0; z < ZoneId::kCount; ++z) out.push_back(zones.test(static_cast<std::size_t>(z)));
  return out;
}

ZoneSet zone_map_from_json(const json& j) {
  if (!j.is_array() || j.size() != ZoneId::kCount) throw std::invalid_argument("zone_hit_map must hold 12 booleans");
  ZoneSet out;
  for (int z = 0; z < ZoneId::kCount; ++z) out.set(static_cast<std::size_t>(z), j[static_cast<std::size_t>(z)].get<bool>());
  return out;
}

void to_json(json& j, const ZoneId& z) { j = z.value(); }
void from_json(const json& j, ZoneId& z) { z = ZoneId(j.get<int>()); }

void to_json(json& j, const Segment& s) { j = json{{"p0", s.p0}, {"p1", s.p1}}; }
void from_json(const json& j, Segment& s) {
  s.p0 = j.at("p0").get<Vec3>();
  s.p1 = j.at("p1").get<Vec3>();
}

void to_json(json& j, const Aabb& b) { j = json{{"min", b.min}, {"max", b.max}}; }
void from_json(const json& j, Aabb& b) {
  b.min = j.at("min").get<Vec3>();
  b.max = j.at("max").get<Vec3>();
}

namespace {

json role_to_json(const AxisRole& r) {
  static constexpr const char* kNames[] = {"x", "y", "z"};
  return json{{"axis", kNames[r.axis]}, {"reversed", r.reversed}};
}

AxisRole role_from_json(const json& j, AxisRole fallback) {
  if (j.is_null()) return fallback;
  AxisRole r = fallback;
  const auto name = j.at("axis").get<std::string>();
  if (name == "x") {
    r.axis = 0;
  } else if (name == "y") {
    r.axis = 1;
  } else if (name == "z") {
    r.axis = 2;
  } else {
    throw std::invalid_argument("axis must be x, y or z");
  }
  r.reversed = j.value("reversed", false);
  return r;
}

const json& member_or_null(const json& j, const char* key) {
  static const json null_value;
  const auto it = j.find(key);
  return it == j.end() ? null_value : *it;
}

}  // namespace

void to_json(json& j, const AxisAssignment& a) {
  j = json{{"cranio_caudal", role_to_json(a.cranio_caudal)},
           {"side", role_to_json(a.side)},
           {"medial_lateral", role_to_json(a.medial_lateral)}};
}

void from_json(const json& j, AxisAssignment& a) {
  AxisAssignment def;
  a.cranio_caudal = role_from_json(member_or_null(j, "cranio_caudal"), def.cranio_caudal);
  a.side = role_from_json(member_or_null(j, "side"), def.side);
  a.medial_lateral = role_from_json(member_or_null(j, "medial_lateral"), def.medial_lateral);
}

void to_json(json& j, const ProbeSpec& s) {
  j = json{{"pivot", s.pivot},
           {"d_max_mm", s.d_max_mm},
           {"tip_offset_mm", s.tip_offset_mm},
           {"guide_angle_deg", s.guide_angle_deg},
           {"guide_offset_mm", s.guide_offset_mm},
           {"pitch_limit_deg", s.pitch_limit_deg},
           {"yaw_limit_deg", s.yaw_limit_deg}};
}

void from_json(const json& j, ProbeSpec& s) {
  ProbeSpec def;
  s.pivot = j.contains("pivot") ? j.at("pivot").get<Vec3>() : def.pivot;
  s.d_max_mm = j.value("d_max_mm", def.d_max_mm);
  s.tip_offset_mm = j.value("tip_offset_mm", def.tip_offset_mm);
  s.guide_angle_deg = j.value("guide_angle_deg", def.guide_angle_deg);
  s.guide_offset_mm = j.value("guide_offset_mm", def.guide_offset_mm);
  s.pitch_limit_deg = j.value("pitch_limit_deg", def.pitch_limit_deg);
  s.yaw_limit_deg = j.value("yaw_limit_deg", def.yaw_limit_deg);
}

void to_json(json& j, const ProbePose& p) {
  j = json{{"depth_mm", p.depth_mm}, {"pitch", p.pitch}, {"yaw", p.yaw}, {"roll", p.roll}};
}

void from_json(const json& j, ProbePose& p) {
  p.depth_mm = j.at("depth_mm").get<double>();
  p.pitch = j.at("pitch").get<double>();
  p.yaw = j.at("yaw").get<double>();
  p.roll = j.at("roll").get<double>();
}

void to_json(json& j, const DevicePose& p) {
  const Quat& q = p.orientation;
  j = json{{"position", p.position}, {"orientation", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

void from_json(const json& j, DevicePose& p) {
  p.position = j.at("position").get<Vec3>();
  const auto& q = j.at("orientation");
  if (!q.is_array() || q.size() != 4) throw std::invalid_argument("orientation must be [w, x, y, z]");
  p.orientation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
}

void to_json(json& j, const NeedleSpec& n) {
  j = json{{"throw_mm", n.throw_mm}, {"notch_mm", n.notch_mm}, {"notch_offset_mm", n.notch_offset_mm}};
}

void from_json(const json& j, NeedleSpec& n) {
  NeedleSpec def;
  n.throw_mm = j.value("throw_mm", def.throw_mm);
  n.notch_mm = j.value("notch_mm", def.notch_mm);
  n.notch_offset_mm = j.value("notch_offset_mm", def.notch_offset_mm);
}

void to_json(json& j, const PhantomSpec& s) {
  j = json{{"seed", s.seed},
           {"dims", s.dims},
           {"spacing", s.spacing},
           {"origin", s.origin},
           {"prostate", {{"center", s.prostate.center}, {"semi_axes", s.prostate.semi_axes}}},
           {"bladder", {{"center", s.bladder.center}, {"radius_mm", s.bladder.radius_mm}}},
           {"rectal_wall",
            {{"axis_xy", s.rectal_wall.axis_xy},
             {"radius_mm", s.rectal_wall.radius_mm},
             {"thickness_mm", s.rectal_wall.thickness_mm},
             {"arc_deg", s.rectal_wall.arc_deg},
             {"z_min_mm", s.rectal_wall.z_min_mm},
             {"z_max_mm", s.rectal_wall.z_max_mm}}},
           {"speckle_contrast", s.speckle_contrast},
           {"interior_mean", s.interior_mean},
           {"exterior_mean", s.exterior_mean},
           {"bladder_mean", s.bladder_mean},
           {"wall_mean", s.wall_mean}};
}

void from_json(const json& j, PhantomSpec& s) {
  // "size" picks the standard field of view at n^3; explicit fields override.
  s = PhantomSpec::standard(j.value("seed", std::uint64_t{1}), j.value("size", 128));
  if (j.contains("dims")) s.dims = j.at("dims").get<GridDims>();
  if (j.contains("spacing")) s.spacing = j.at("spacing").get<Vec3>();
  if (j.contains("origin")) s.origin = j.at("origin").get<Vec3>();
  if (j.contains("prostate")) {
    const auto& p = j.at("prostate");
    if (p.contains("center")) s.prostate.center = p.at("center").get<Vec3>();
    if (p.contains("semi_axes")) s.prostate.semi_axes = p.at("semi_axes").get<Vec3>();
  }
  if (j.contains("bladder")) {
    const auto& b = j.at("bladder");
    if (b.contains("center")) s.bladder.center = b.at("center").get<Vec3>();
    s.bladder.radius_mm = b.value("radius_mm", s.bladder.radius_mm);
  }
  if (j.contains("rectal_wall")) {
    const auto& w = j.at("rectal_wall");
    if (w.contains("axis_xy")) s.rectal_wall.axis_xy = w.at("axis_xy").get<Vec2>();
    s.rectal_wall.radius_mm = w.value("radius_mm", s.rectal_wall.radius_mm);
    s.rectal_wall.thickness_mm = w.value("thickness_mm", s.rectal_wall.thickness_mm);
    s.rectal_wall.arc_deg = w.value("arc_deg", s.rectal_wall.arc_deg);
    s.rectal_wall.z_min_mm = w.value("z_min_mm", s.rectal_wall.z_min_mm);
    s.rectal_wall.z_max_mm = w.value("z_max_mm", s.rectal_wall.z_max_mm);
  }
  s.speckle_contrast = j.value("speckle_contrast", s.speckle_contrast);
  s.interior_mean = j.value("interior_mean", s.interior_mean);
  s.exterior_mean = j.value("exterior_mean", s.exterior_mean);
  s.bladder_mean = j.value("bladder_mean", s.bladder_mean);
  s.wall_mean = j.value("wall_mean", s.wall_mean);
}

void to_json(json& j, const Target& t) { j = json{{"id", t.id}, {"center", t.center}, {"radius_mm", t.radius_mm}}; }
void from_json(const json& j, Target& t) {
  t.id = j.at("id").get<std::string>();
  t.center = j.at("center").get<Vec3>();
  t.radius_mm = j.at("radius_mm").get<double>();
  if (!(t.radius_mm > 0.0)) throw ValidationError("radius_mm", "target radius must be > 0");
}

void to_json(json& j, const BiopsySample& s) {
  j = json{{"order_index", s.order_index},   {"fire_pose", s.fire_pose},  {"insertion_mm", s.insertion_mm},
           {"segment", s.segment},           {"inside_mm", s.inside_mm},  {"zones", zones_to_json(s.zones)},
           {"out_of_gland", s.out_of_gland}, {"timestamp_ms", s.timestamp_ms}};
}

void from_json(const json& j, BiopsySample& s) {
  s.order_index = j.at("order_index").get<int>();
  s.fire_pose = j.at("fire_pose").get<ProbePose>();
  s.insertion_mm = j.at("insertion_mm").get<double>();
  s.segment = j.at("segment").get<Segment>();
  s.inside_mm = j.at("inside_mm").get<double>();
  s.zones = zones_from_json(j.at("zones"));
  s.out_of_gland = j.at("out_of_gland").get<bool>();
  s.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
}

void to_json(json& j, const TargetHit& h) {
  j = json{{"target_id", h.target_id}, {"hit", h.hit}, {"min_distance_mm", nullptr}};
  if (h.min_distance_mm) j["min_distance_mm"] = *h.min_distance_mm;
}

void from_json(const json& j, TargetHit& h) {
  h.target_id = j.at("target_id").get<std::string>();
  h.hit = j.at("hit").get<bool>();
  const auto& d = j.at("min_distance_mm");
  h.min_distance_mm = d.is_null() ? std::nullopt : std::optional<double>(d.get<double>());
}

void to_json(json& j, const ProtocolResult& r) {
  j = json{{"samples", r.samples},
           {"coverage", r.coverage},
           {"zone_hit_map", zone_map_to_json(r.zone_hit_map)},
           {"out_of_gland_count", r.out_of_gland_count},
           {"order_score", r.order_score},
           {"target_hits", r.target_hits},
           {"total_inside_mm", r.total_inside_mm}};
}

void from_json(const json& j, ProtocolResult& r) {
  r.samples = j.at("samples").get<std::vector<BiopsySample>>();
  r.coverage = j.at("coverage").get<double>();
  r.zone_hit_map = zone_map_from_json(j.at("zone_hit_map"));
  r.out_of_gland_count = j.at("out_of_gland_count").get<int>();
  r.order_score = j.at("order_score").get<double>();
  r.target_hits = j.at("target_hits").get<std::vector<TargetHit>>();
  r.total_inside_mm = j.at("total_inside_mm").get<double>();
}

void to_json(json& j, const PatientRecord& p) {
  j = json{{"age", p.age}, {"psa", p.psa}, {"prostate_volume_cc", p.prostate_volume_cc}, {"dre_abnormal", p.dre_abnormal}};
}

void from_json(const json& j, PatientRecord& p) {
  auto number = [&j](const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) throw ValidationError(key, std::string(key) + " must be a number");
    return it->get<double>();
  };
  const double age = number("age");
  if (age != std::floor(age)) throw ValidationError("age", "age must be an integer");
  p.age = static_cast<int>(std::clamp(age, -1.0, 1000.0));
  p.psa = number("psa");
  p.prostate_volume_cc = number("prostate_volume_cc");
  const auto dre = j.find("dre_abnormal");
  if (dre != j.end() && !dre->is_boolean()) throw ValidationError("dre_abnormal", "dre_abnormal must be a boolean");
  p.dre_abnormal = dre != j.end() && dre->get<bool>();
}

void to_json(json& j, const Caliper& c) {
  j = json{{"a", c.a_px}, {"b", c.b_px}, {"mm_per_px_u", c.mm_per_px_u}, {"mm_per_px_v", c.mm_per_px_v}};
}

void from_json(const json& j, Caliper& c) {
  c.a_px = j.at("a").get<Vec2>();
  c.b_px = j.at("b").get<Vec2>();
  c.mm_per_px_u = j.at("mm_per_px_u").get<double>();
  c.mm_per_px_v = j.value("mm_per_px_v", c.mm_per_px_u);
}

void to_json(json& j, const SimulationWeights& w) {
  j = json{{"coverage", w.coverage}, {"order", w.order}, {"in_gland", w.in_gland}, {"targets", w.targets}};
}

void from_json(const json& j, SimulationWeights& w) {
  SimulationWeights def;
  w.coverage = j.value("coverage", def.coverage);
  w.order = j.value("order", def.order);
  w.in_gland = j.value("in_gland", def.in_gland);
  w.targets = j.value("targets", def.targets);
}

void to_json(json& j, const ExerciseDef& e) {
  json assist = json::array();
  if (e.constraints.coronal_view) assist.push_back("coronal");
  if (e.constraints.view_3d) assist.push_back("3d");
  j = json{{"id", e.id},
           {"kind", to_string(e.kind)},
           {"title", e.title},
           {"scenario", e.scenario_id},
           {"constraints",
            {{"assistance", assist},
             {"patient_position", e.constraints.patient_position},
             {"extra_targets", e.constraints.extra_targets}}},
           {"grading",
            {{"caliper_tolerance", e.grading.caliper_tolerance},
             {"tau_mm", e.grading.tau_mm},
             {"weights", e.grading.weights},
             {"region", e.grading.region}}},
           {"focus_zones", zones_to_json(e.focus_zones)}};
}

void from_json(const json& j, ExerciseDef& e) {
  e = ExerciseDef{};
  e.id = j.at("id").get<std::string>();
  const auto kind = exercise_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw ValidationError("kind", "unknown exercise kind in " + e.id);
  e.kind = *kind;
  e.title = j.value("title", e.id);
  e.scenario_id = j.value("scenario", std::string{});
  if (j.contains("constraints")) {
    const auto& c = j.at("constraints");
    for (const auto& v : c.value("assistance", json::array())) {
      const auto view = v.get<std::string>();
      if (view == "coronal") {
        e.constraints.coronal_view = true;
      } else if (view == "3d") {
        e.constraints.view_3d = true;
      } else {
        throw ValidationError("constraints.assistance", "unknown assistance view " + view);
      }
    }
    e.constraints.patient_position = c.value("patient_position", e.constraints.patient_position);
    e.constraints.extra_targets = c.value("extra_targets", false);
  }
  if (j.contains("grading")) {
    const auto& g = j.at("grading");
    e.grading.caliper_tolerance = g.value("caliper_tolerance", e.grading.caliper_tolerance);
    e.grading.tau_mm = g.value("tau_mm", e.grading.tau_mm);
    if (g.contains("weights")) e.grading.weights = g.at("weights").get<SimulationWeights>();
    e.grading.region = g.value("region", e.grading.region);
  }
  if (j.contains("focus_zones")) e.focus_zones = zones_from_json(j.at("focus_zones"));
}

void to_json(json& j, const ExerciseCatalog& c) {
  json content = json::array();
  for (const auto& item : c.content) content.push_back({{"id", item.id}, {"title", item.title}, {"kind", item.kind}});
  j = json{{"exercises", c.exercises},
           {"risk_rules",
            {{"high_density", c.risk_rules.high_density},
             {"low_psa", c.risk_rules.low_psa},
             {"low_density", c.risk_rules.low_density}}},
           {"recommendation",
            {{"window", c.recommendation.window},
             {"zone_hit_threshold", c.recommendation.zone_hit_threshold},
             {"volume_threshold", c.recommendation.volume_threshold},
             {"beginner_sequence", c.recommendation.beginner_sequence}}},
           {"content", content}};
}

void from_json(const json& j, ExerciseCatalog& c) {
  c = ExerciseCatalog{};
  c.exercises = j.at("exercises").get<std::vector<ExerciseDef>>();
  if (j.contains("risk_rules")) {
    const auto& r = j.at("risk_rules");
    c.risk_rules.high_density = r.value("high_density", c.risk_rules.high_density);
    c.risk_rules.low_psa = r.value("low_psa", c.risk_rules.low_psa);
    c.risk_rules.low_density = r.value("low_density", c.risk_rules.low_density);
  }
  if (j.contains("recommendation")) {
    const auto& r = j.at("recommendation");
    c.recommendation.window = r.value("window", c.recommendation.window);
    c.recommendation.zone_hit_threshold = r.value("zone_hit_threshold", c.recommendation.zone_hit_threshold);
    c.recommendation.volume_threshold = r.value("volume_threshold", c.recommendation.volume_threshold);
    c.recommendation.beginner_sequence = r.value("beginner_sequence", std::vector<std::string>{});
  }
  for (const auto& item : j.value("content", json::array())) {
    c.content.push_back({item.at("id").get<std::string>(), item.value("title", std::string{}),
                         item.value("kind", std::string{"lecture"})});
  }
}

void to_json(json& j, const Attempt& a) {
  j = json{{"attempt_id", a.attempt_id},     {"user_id", a.user_id}, {"exercise_id", a.exercise_id},
           {"kind", to_string(a.kind)},      {"timestamp_ms", a.timestamp_ms}, {"inputs", a.inputs},
           {"score", a.score},               {"detail", a.detail}};
}

void from_json(const json& j, Attempt& a) {
  a.attempt_id = j.at("attempt_id").get<std::string>();
  a.user_id = j.at("user_id").get<std::string>();
  a.exercise_id = j.at("exercise_id").get<std::string>();
  const auto kind = exercise_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown attempt kind");
  a.kind = *kind;
  a.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  a.inputs = j.at("inputs");
  a.score = j.at("score").get<double>();
  a.detail = j.at("detail");
}

}  // namespace biopsym
