#pragma once

// JSON mappings for the domain types. Angles in ProbeSpec are written in
// degrees; ProbePose angles are radians (they are runtime state, not config).

#include <nlohmann/json.hpp>

#include "biopsym/anatomy.hpp"
#include "biopsym/biopsy.hpp"
#include "biopsym/exercises.hpp"
#include "biopsym/probe.hpp"
#include "biopsym/volume.hpp"

namespace nlohmann {

template <>
struct adl_serializer<biopsym::Vec3> {
  static void to_json(json& j, const biopsym::Vec3& v) { j = json::array({v.x(), v.y(), v.z()}); }
  static void from_json(const json& j, biopsym::Vec3& v) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected [x, y, z]");
    v = biopsym::Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  }
};

template <>
struct adl_serializer<biopsym::Vec2> {
  static void to_json(json& j, const biopsym::Vec2& v) { j = json::array({v.x(), v.y()}); }
  static void from_json(const json& j, biopsym::Vec2& v) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [x, y]");
    v = biopsym::Vec2(j[0].get<double>(), j[1].get<double>());
  }
};

}  // namespace nlohmann

namespace biopsym {

using json = nlohmann::json;

json zones_to_json(const ZoneSet& zones);      // sorted id list
ZoneSet zones_from_json(const json& j);
json zone_map_to_json(const ZoneSet& zones);   // 12 booleans
ZoneSet zone_map_from_json(const json& j);

void to_json(json& j, const ZoneId& z);
void from_json(const json& j, ZoneId& z);

void to_json(json& j, const Segment& s);
void from_json(const json& j, Segment& s);

void to_json(json& j, const Aabb& b);
void from_json(const json& j, Aabb& b);

void to_json(json& j, const AxisAssignment& a);
void from_json(const json& j, AxisAssignment& a);

void to_json(json& j, const ProbeSpec& s);
void from_json(const json& j, ProbeSpec& s);

void to_json(json& j, const ProbePose& p);
void from_json(const json& j, ProbePose& p);

void to_json(json& j, const DevicePose& p);
void from_json(const json& j, DevicePose& p);

void to_json(json& j, const NeedleSpec& n);
void from_json(const json& j, NeedleSpec& n);

void to_json(json& j, const PhantomSpec& s);
void from_json(const json& j, PhantomSpec& s);

void to_json(json& j, const Target& t);
void from_json(const json& j, Target& t);

void to_json(json& j, const BiopsySample& s);
void from_json(const json& j, BiopsySample& s);

void to_json(json& j, const TargetHit& h);
void from_json(const json& j, TargetHit& h);

void to_json(json& j, const ProtocolResult& r);
void from_json(const json& j, ProtocolResult& r);

void to_json(json& j, const PatientRecord& p);
void from_json(const json& j, PatientRecord& p);

void to_json(json& j, const Caliper& c);
void from_json(const json& j, Caliper& c);

void to_json(json& j, const SimulationWeights& w);
void from_json(const json& j, SimulationWeights& w);

void to_json(json& j, const ExerciseDef& e);
void from_json(const json& j, ExerciseDef& e);

void to_json(json& j, const ExerciseCatalog& c);
void from_json(const json& j, ExerciseCatalog& c);

void to_json(json& j, const Attempt& a);
void from_json(const json& j, Attempt& a);

}  // namespace biopsym
