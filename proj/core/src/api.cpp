#include "biopsym/api.hpp"

#include <cctype>
#include <fstream>

#include "biopsym/error.hpp"
#include "biopsym/json_io.hpp"

namespace biopsym {

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string text;
  std::string field;
};

HttpResponse json_response(int status, const json& j) { return HttpResponse{status, "application/json", j.dump()}; }

HttpResponse error_response(const HttpError& e) {
  json err{{"code", e.code}, {"text", e.text}};
  if (!e.field.empty()) err["field"] = e.field;
  return json_response(e.status, json{{"error", err}});
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (pos < path.size()) {
    if (path[pos] == '/') {
      ++pos;
      continue;
    }
    const auto next = path.find('/', pos);
    const auto end = next == std::string_view::npos ? path.size() : next;
    parts.push_back(path.substr(pos, end - pos));
    pos = end;
  }
  return parts;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '+') {
      out.push_back(' ');
    } else if (s[k] == '%' && k + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[k + 1])) &&
               std::isxdigit(static_cast<unsigned char>(s[k + 2]))) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(k + 1, 2)), nullptr, 16)));
      k += 2;
    } else {
      out.push_back(s[k]);
    }
  }
  return out;
}

std::map<std::string, std::string> parse_query(std::string_view q) {
  std::map<std::string, std::string> out;
  while (!q.empty()) {
    const auto amp = q.find('&');
    const auto pair = q.substr(0, amp);
    const auto eq = pair.find('=');
    if (eq == std::string_view::npos) {
      out[percent_decode(pair)] = "";
    } else {
      out[percent_decode(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
    }
    if (amp == std::string_view::npos) break;
    q.remove_prefix(amp + 1);
  }
  return out;
}

json parse_body(std::string_view body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw HttpError{400, "malformed", "request body must be a JSON object", ""};
    return j;
  } catch (const json::exception& e) {
    throw HttpError{400, "malformed", std::string("request body: ") + e.what(), ""};
  }
}

std::string required_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty())
    throw HttpError{400, "malformed", std::string(key) + " must be a non-empty string", key};
  return it->get<std::string>();
}

json mesh_json(const TriMesh& mesh) {
  json v = json::array();
  for (const auto& p : mesh.vertices) v.push_back(json::array({p.x(), p.y(), p.z()}));
  json t = json::array();
  for (const auto& tri : mesh.triangles) t.push_back(json::array({tri[0], tri[1], tri[2]}));
  return json{{"vertices", v}, {"triangles", t}};
}

json scenario_summary(const LoadedScenario& s) {
  json views = json::array();
  if (s.def.allow_coronal) views.push_back("coronal");
  if (s.def.allow_3d) views.push_back("3d");
  return json{{"id", s.def.id},
              {"title", s.def.title},
              {"patient_position", s.def.patient_position},
              {"assistance", views},
              {"targets", s.def.targets.size()},
              {"slice", {{"px_w", s.def.slice.px_w}, {"px_h", s.def.slice.px_h}}}};
}

}  // namespace

ExerciseCatalog load_exercise_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open exercise file: " + path.string());
  ExerciseCatalog cat;
  try {
    cat = json::parse(in).get<ExerciseCatalog>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::parse_error, "exercise file " + path.string() + ": " + e.what());
  }
  cat.validate();
  return cat;
}

Api::Api(ScenarioCatalog scenarios, ExerciseCatalog exercises, std::shared_ptr<SessionStore> store, Clock clock)
    : scenarios_(std::move(scenarios)),
      exercises_(std::move(exercises)),
      store_(std::move(store)),
      clock_(clock ? std::move(clock) : Clock(now_ms)) {
  if (!store_) throw Error(Errc::invalid_argument, "api needs a session store");
  exercises_.validate();
  for (const auto& ex : exercises_.exercises) {
    if (!ex.scenario_id.empty() && !scenarios_.find(ex.scenario_id))
      throw ValidationError("scenario", "exercise " + ex.id + " names unknown scenario " + ex.scenario_id);
  }
}

std::optional<std::string> Api::stream_target(std::string_view target) {
  const auto path = target.substr(0, target.find('?'));
  const auto parts = split_path(path);
  if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "stream") return std::string(parts[1]);
  return std::nullopt;
}

HttpResponse Api::handle(std::string_view method, std::string_view target, std::string_view body) {
  const auto qpos = target.find('?');
  const auto path = target.substr(0, qpos);
  const auto query = qpos == std::string_view::npos ? std::map<std::string, std::string>{}
                                                    : parse_query(target.substr(qpos + 1));
  const auto p = split_path(path);
  const bool get = method == "GET";
  const bool post = method == "POST";

  try {
    if (p.size() == 1 && p[0] == "health" && get)
      return json_response(200, json{{"status", "ok"}, {"version", kVersion}});

    if (p.size() >= 1 && p[0] == "users") {
      if (p.size() == 1 && post) return create_user(parse_body(body));
      if (p.size() >= 2 && get) {
        const std::string id(p[1]);
        if (!store_->has_user(id)) throw HttpError{404, "not_found", "unknown user " + id, ""};
        if (p.size() == 2) return json_response(200, *store_->user(id));
        if (p.size() == 3 && p[2] == "timeline")
          return json_response(200, json{{"user_id", id}, {"entries", store_->timeline(id)}});
        if (p.size() == 3 && p[2] == "series") {
          const auto kind = query.find("kind");
          if (kind == query.end() || kind->second.empty())
            throw HttpError{400, "malformed", "series needs ?kind=", "kind"};
          if (kind->second != "session" && !exercise_kind_from_string(kind->second))
            throw HttpError{400, "malformed", "unknown kind " + kind->second, "kind"};
          return json_response(
              200, json{{"user_id", id}, {"kind", kind->second}, {"points", store_->score_series(id, kind->second)}});
        }
        if (p.size() == 3 && p[2] == "recommendations") {
          const auto history = store_->attempts_of(id);
          return json_response(200,
                               json{{"user_id", id}, {"recommendations", recommend_exercises(history, exercises_)}});
        }
      }
    }

    if (p.size() >= 1 && p[0] == "scenarios" && get) {
      if (p.size() == 1) {
        json list = json::array();
        for (const auto& s : scenarios_.list()) list.push_back(scenario_summary(*s));
        return json_response(200, json{{"scenarios", list}});
      }
      const auto s = scenarios_.find(p[1]);
      if (!s) throw HttpError{404, "not_found", "unknown scenario " + std::string(p[1]), ""};
      if (p.size() == 2) return json_response(200, scenario_to_json(s->def));
      if (p.size() == 3 && p[2] == "mesh") return json_response(200, mesh_json(s->prostate->mesh));
    }

    if (p.size() == 1 && p[0] == "exercises" && get) {
      json list = json::array();
      for (const auto& ex : exercises_.exercises) list.push_back(ex);
      return json_response(200, json{{"exercises", list}});
    }
    if (p.size() == 3 && p[0] == "exercises" && p[2] == "attempts" && post) return post_attempt(p[1], parse_body(body));

    if (p.size() == 1 && p[0] == "content" && get) {
      json list = json::array();
      for (const auto& c : exercises_.content) list.push_back(json{{"id", c.id}, {"title", c.title}, {"kind", c.kind}});
      return json_response(200, json{{"content", list}});
    }

    if (p.size() == 1 && p[0] == "sessions" && post) return create_session(parse_body(body));
    if (p.size() == 3 && p[0] == "sessions" && p[2] == "replay" && get)
      return json_response(200, json{{"session", store_->replay(p[1])}});

    return error_response(HttpError{404, "not_found", "no route for " + std::string(method) + " " + std::string(path), ""});
  } catch (const HttpError& e) {
    return error_response(e);
  } catch (const ValidationError& e) {
    return error_response(HttpError{422, "invalid_argument", e.what(), e.field()});
  } catch (const Error& e) {
    int status = 500;
    switch (e.code()) {
      case Errc::not_found:
      case Errc::unknown_reference: status = 404; break;
      case Errc::invalid_argument:
      case Errc::parse_error: status = 400; break;
      default: break;
    }
    return error_response(HttpError{status, std::string(to_string(e.code())), e.what(), ""});
  } catch (const std::exception& e) {
    return error_response(HttpError{500, "internal", e.what(), ""});
  }
}

HttpResponse Api::create_user(const json& body) {
  std::string name;
  if (const auto it = body.find("display_name"); it != body.end()) {
    if (!it->is_string()) throw HttpError{400, "malformed", "display_name must be a string", "display_name"};
    name = it->get<std::string>();
  }
  UserProfile u;
  u.user_id = random_id();
  u.display_name = name;
  u.created_at_ms = clock_();
  store_->add_user(u);
  return json_response(201, u);
}

HttpResponse Api::create_session(const json& body) {
  const std::string user_id = required_string(body, "user_id");
  std::optional<ExerciseDef> exercise;
  if (const auto it = body.find("exercise_id"); it != body.end() && !it->is_null()) {
    const std::string ex_id = required_string(body, "exercise_id");
    const ExerciseDef* ex = exercises_.find(ex_id);
    if (!ex) throw HttpError{404, "not_found", "unknown exercise " + ex_id, ""};
    if (ex->kind != ExerciseKind::guided_simulation)
      throw HttpError{400, "malformed", "exercise " + ex_id + " is not a simulation", "exercise_id"};
    exercise = *ex;
  }
  std::string scenario_id;
  if (body.contains("scenario_id")) {
    scenario_id = required_string(body, "scenario_id");
  } else if (exercise) {
    scenario_id = exercise->scenario_id;
  } else {
    throw HttpError{400, "malformed", "scenario_id is required", "scenario_id"};
  }
  if (exercise && exercise->scenario_id != scenario_id)
    throw HttpError{400, "malformed", "exercise runs on scenario " + exercise->scenario_id, "scenario_id"};

  const auto scenario = scenarios_.find(scenario_id);
  if (!scenario) throw HttpError{404, "not_found", "unknown scenario " + scenario_id, ""};
  if (!store_->has_user(user_id)) throw HttpError{404, "not_found", "unknown user " + user_id, ""};

  StreamSession::Options opts;
  opts.session_id = random_id();
  opts.user_id = user_id;
  opts.exercise_id = exercise ? exercise->id : "";
  opts.exercise = exercise;
  opts.clock = clock_;
  auto live = std::make_shared<LiveSession>(scenario, store_, opts);
  {
    std::lock_guard lock(live_mutex_);
    live_[opts.session_id] = live;
  }
  return json_response(201, json{{"session_id", opts.session_id},
                                 {"scenario_id", scenario_id},
                                 {"exercise_id", opts.exercise_id},
                                 {"stream", "/sessions/" + opts.session_id + "/stream"}});
}

std::shared_ptr<LiveSession> Api::attach_stream(std::string_view session_id, std::string* why) {
  std::lock_guard lock(live_mutex_);
  const auto it = live_.find(session_id);
  auto fail = [&](const char* text) -> std::shared_ptr<LiveSession> {
    if (why) *why = text;
    return nullptr;
  };
  if (it == live_.end()) return fail("unknown or finished session");
  std::lock_guard session_lock(it->second->mutex);
  if (it->second->stream.state() == StreamSession::State::ended) return fail("session already ended");
  if (it->second->attached) return fail("session already has a stream");
  it->second->attached = true;
  return it->second;
}

void Api::detach_stream(const std::shared_ptr<LiveSession>& live) {
  if (!live) return;
  std::lock_guard lock(live_mutex_);
  std::lock_guard session_lock(live->mutex);
  live->attached = false;
  if (live->stream.state() == StreamSession::State::ended) live_.erase(live->stream.session_id());
}

HttpResponse Api::post_attempt(std::string_view exercise_id, const json& body) {
  const ExerciseDef* ex = exercises_.find(exercise_id);
  if (!ex) throw HttpError{404, "not_found", "unknown exercise " + std::string(exercise_id), ""};
  const std::string user_id = required_string(body, "user_id");
  if (!store_->has_user(user_id)) throw HttpError{404, "not_found", "unknown user " + user_id, ""};
  const auto it = body.find("inputs");
  if (it == body.end() || !it->is_object()) throw ValidationError("inputs", "inputs must be an object");

  Attempt a = grade_attempt(*ex, user_id, *it);
  a.attempt_id = store_->record_attempt(a);
  return json_response(201, a);
}

namespace {

// Re-raises a grading ValidationError with its field placed under prefix.
template <typename F>
auto with_field_prefix(const std::string& prefix, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.field(), e.what());
  } catch (const json::exception& e) {
    throw ValidationError(prefix.substr(0, prefix.size() - 1), e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(prefix.substr(0, prefix.size() - 1), e.what());
  }
}

}  // namespace

Attempt Api::grade_attempt(const ExerciseDef& ex, const std::string& user_id, const json& inputs) {
  Attempt a;
  a.user_id = user_id;
  a.exercise_id = ex.id;
  a.kind = ex.kind;
  a.timestamp_ms = clock_();
  a.inputs = inputs;

  switch (ex.kind) {
    case ExerciseKind::questionnaire: {
      if (!inputs.contains("patient")) throw ValidationError("inputs.patient", "patient record is required");
      const PatientRecord patient = with_field_prefix("inputs.patient.", [&] {
        PatientRecord p = inputs.at("patient").get<PatientRecord>();
        p.validate();
        return p;
      });
      const auto answer_it = inputs.find("answer");
      if (answer_it == inputs.end() || !answer_it->is_string())
        throw ValidationError("inputs.answer", "answer must be low, intermediate or high");
      const auto answer = risk_band_from_string(answer_it->get<std::string>());
      if (!answer) throw ValidationError("inputs.answer", "answer must be low, intermediate or high");
      const RiskAssessment risk = risk_score(patient, exercises_.risk_rules);
      a.score = grade_risk_answer(risk.band, *answer);
      a.detail = json{{"psa_density", risk.psa_density}, {"expected", to_string(risk.band)}, {"rationale", risk.rationale}};
      break;
    }
    case ExerciseKind::volume_estimate: {
      const auto scenario = scenarios_.find(ex.scenario_id);
      const auto calipers = with_field_prefix("inputs.", [&] {
        if (!inputs.contains("calipers")) throw ValidationError("calipers", "calipers are required");
        try {
          return inputs.at("calipers").get<std::vector<Caliper>>();
        } catch (const std::exception& e) {
          throw ValidationError("calipers", e.what());
        }
      });
      const auto dims = scenario->prostate_dims_mm();
      const VolumeGrade g =
          with_field_prefix("inputs.", [&] { return grade_volume_estimate(dims, calipers, ex.grading.caliper_tolerance); });
      a.score = g.score;
      a.detail = json{{"measured_mm", g.measured_mm},
                      {"true_mm", dims},
                      {"relative_error", g.relative_error},
                      {"volume_cc", ellipsoid_volume_cc(g.measured_mm[0], g.measured_mm[1], g.measured_mm[2])},
                      {"true_volume_cc", ellipsoid_volume_cc(dims[0], dims[1], dims[2])}};
      break;
    }
    case ExerciseKind::structure_localization: {
      const auto scenario = scenarios_.find(ex.scenario_id);
      const auto region = scenario->region(ex.grading.region);
      if (!region) throw Error(Errc::unknown_reference, "scenario has no region " + ex.grading.region);
      const Vec3 point = with_field_prefix("inputs.", [&] {
        if (!inputs.contains("point")) throw ValidationError("point", "point is required");
        try {
          return inputs.at("point").get<Vec3>();
        } catch (const std::exception& e) {
          throw ValidationError("point", e.what());
        }
      });
      a.score = with_field_prefix("inputs.", [&] { return grade_localization(*region, point, ex.grading.tau_mm); });
      a.detail = json{{"region", region->name}, {"distance_mm", region->distance(point)}};
      break;
    }
    case ExerciseKind::guided_simulation: {
      const auto sid = inputs.find("session_id");
      if (sid == inputs.end() || !sid->is_string()) throw ValidationError("inputs.session_id", "session_id is required");
      SessionRecord rec;
      try {
        rec = store_->replay(sid->get<std::string>());
      } catch (const Error&) {
        throw ValidationError("inputs.session_id", "unknown session");
      }
      if (rec.user_id != user_id) throw ValidationError("inputs.session_id", "session belongs to another user");
      if (rec.scenario_id != ex.scenario_id)
        throw ValidationError("inputs.session_id", "session ran on scenario " + rec.scenario_id);
      a.score = grade_simulation(rec.result, ex.grading.weights);
      a.detail = json{{"session_id", rec.session_id},
                      {"coverage", rec.result.coverage},
                      {"order_score", rec.result.order_score},
                      {"zone_hit_map", zone_map_to_json(rec.result.zone_hit_map)}};
      break;
    }
  }
  return a;
}

}  // namespace biopsym
