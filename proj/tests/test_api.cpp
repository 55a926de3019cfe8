#include <doctest.h>

#include "biopsym/api.hpp"
#include "biopsym/json_io.hpp"
#include "records.hpp"

using namespace biopsym;

namespace {

struct Fixture {
  TempDir dir;
  std::shared_ptr<Api> api;

  Fixture() {
    static const ScenarioCatalog scenarios =
        ScenarioCatalog::load(std::string(BIOPSYM_TEST_DATA_DIR) + "/scenarios.json");
    auto t = std::make_shared<std::int64_t>(1700000000000LL);
    api = std::make_shared<Api>(scenarios, load_exercise_catalog(std::string(BIOPSYM_TEST_DATA_DIR) + "/exercises.json"),
                                SessionStore::open(dir.path(), false), [t] { return (*t)++; });
  }

  std::pair<int, json> call(std::string_view method, std::string_view target, const json& body = nullptr) {
    const HttpResponse r = api->handle(method, target, body.is_null() ? "" : body.dump());
    CHECK(r.content_type == "application/json");
    return {r.status, json::parse(r.body)};
  }

  std::string new_user(const std::string& name = "trainee") {
    auto [status, body] = call("POST", "/users", {{"display_name", name}});
    REQUIRE(status == 201);
    return body["user_id"].get<std::string>();
  }
};

}  // namespace

TEST_CASE("health") {
  Fixture f;
  auto [status, body] = f.call("GET", "/health");
  CHECK(status == 200);
  CHECK(body == json{{"status", "ok"}, {"version", "0.3.0"}});
}

TEST_CASE("users") {
  Fixture f;
  const std::string id = f.new_user("Ada");
  auto [status, body] = f.call("GET", "/users/" + id);
  CHECK(status == 200);
  CHECK(body["display_name"] == "Ada");
  CHECK(f.call("GET", "/users/nobody").first == 404);
  CHECK(f.call("POST", "/users", {{"display_name", 5}}).first == 400);
  CHECK(f.api->handle("POST", "/users", "{oops").status == 400);
  auto [tl_status, tl] = f.call("GET", "/users/" + id + "/timeline");
  CHECK(tl_status == 200);
  CHECK(tl["entries"].empty());
  CHECK(f.call("GET", "/users/" + id + "/series").first == 400);
  CHECK(f.call("GET", "/users/" + id + "/series?kind=juggling").first == 400);
  CHECK(f.call("GET", "/users/" + id + "/series?kind=session").first == 200);
  auto [rec_status, rec] = f.call("GET", "/users/" + id + "/recommendations");
  CHECK(rec_status == 200);
  CHECK(rec["recommendations"] == json::array({"risk-basics", "volume-standard", "find-bladder", "sim-assisted"}));
}

TEST_CASE("catalog routes") {
  Fixture f;
  auto [status, list] = f.call("GET", "/scenarios");
  CHECK(status == 200);
  CHECK(list["scenarios"].size() == 2);
  CHECK(f.call("GET", "/scenarios/standard").second["id"] == "standard");
  CHECK(f.call("GET", "/scenarios/unknown").first == 404);
  auto [mesh_status, mesh] = f.call("GET", "/scenarios/standard/mesh");
  CHECK(mesh_status == 200);
  CHECK(mesh["vertices"].size() == 642);
  CHECK(mesh["triangles"].size() == 1280);
  CHECK(f.call("GET", "/exercises").second["exercises"].size() >= 8);
  CHECK(f.call("GET", "/content").second["content"].size() == 2);
  CHECK(f.call("GET", "/nowhere").first == 404);
  CHECK(f.call("DELETE", "/health").first == 404);
}

TEST_CASE("questionnaire attempts are graded and validated") {
  Fixture f;
  const std::string id = f.new_user();
  const json patient{{"age", 64}, {"psa", 4.5}, {"prostate_volume_cc", 30.0}, {"dre_abnormal", false}};
  auto [status, a] = f.call("POST", "/exercises/risk-basics/attempts",
                            {{"user_id", id}, {"inputs", {{"patient", patient}, {"answer", "high"}}}});
  CHECK(status == 201);
  CHECK(a["score"] == 1.0);
  CHECK(a["detail"]["expected"] == "high");
  CHECK(a["attempt_id"].get<std::string>().size() == 32);

  json bad = patient;
  bad["psa"] = -1;
  auto [s422, err] = f.call("POST", "/exercises/risk-basics/attempts",
                            {{"user_id", id}, {"inputs", {{"patient", bad}, {"answer", "high"}}}});
  CHECK(s422 == 422);
  CHECK(err["error"]["field"] == "inputs.patient.psa");
  auto [s422b, err2] = f.call("POST", "/exercises/risk-basics/attempts",
                              {{"user_id", id}, {"inputs", {{"patient", patient}, {"answer", "maybe"}}}});
  CHECK(s422b == 422);
  CHECK(err2["error"]["field"] == "inputs.answer");
  CHECK(f.call("POST", "/exercises/risk-basics/attempts", {{"user_id", "ghost"}, {"inputs", json::object()}}).first ==
        404);
  CHECK(f.call("POST", "/exercises/nope/attempts", {{"user_id", id}, {"inputs", json::object()}}).first == 404);
  CHECK(f.call("POST", "/exercises/risk-basics/attempts", {{"user_id", id}}).first == 422);

  auto [series_status, series] = f.call("GET", "/users/" + id + "/series?kind=questionnaire");
  CHECK(series_status == 200);
  CHECK(series["points"].size() == 1);
}

TEST_CASE("volume and localization attempts") {
  Fixture f;
  const std::string id = f.new_user();
  // Standard gland: 35 x 44 x 30 mm along cc, side, ml.
  json calipers = json::array();
  for (double mm : {35.0, 44.0, 30.0}) calipers.push_back({{"a", {0, 0}}, {"b", {mm, 0}}, {"mm_per_px_u", 1.0}, {"mm_per_px_v", 1.0}});
  auto [status, a] = f.call("POST", "/exercises/volume-standard/attempts",
                            {{"user_id", id}, {"inputs", {{"calipers", calipers}}}});
  CHECK(status == 201);
  CHECK(a["score"].get<double>() == doctest::Approx(1.0));
  calipers.erase(2);
  CHECK(f.call("POST", "/exercises/volume-standard/attempts", {{"user_id", id}, {"inputs", {{"calipers", calipers}}}})
            .second["error"]["field"] == "inputs.calipers");

  // Bladder sphere at (28, 0, 92), r = 15: 5 mm outside scores 0.5.
  auto [s2, loc] = f.call("POST", "/exercises/find-bladder/attempts",
                          {{"user_id", id}, {"inputs", {{"point", {28, 0, 112}}}}});
  CHECK(s2 == 201);
  CHECK(loc["score"].get<double>() == doctest::Approx(0.5));
  const auto bad_point =
      f.call("POST", "/exercises/find-bladder/attempts", {{"user_id", id}, {"inputs", {{"point", {1, 2}}}}});
  CHECK(bad_point.first == 422);
  CHECK(bad_point.second["error"]["field"] == "inputs.point");
  calipers[0].erase("a");
  CHECK(f.call("POST", "/exercises/volume-standard/attempts", {{"user_id", id}, {"inputs", {{"calipers", calipers}}}})
            .second["error"]["field"] == "inputs.calipers");
}

TEST_CASE("sessions: creation errors") {
  Fixture f;
  const std::string id = f.new_user();
  CHECK(f.call("POST", "/sessions", {{"user_id", id}}).first == 400);
  CHECK(f.call("POST", "/sessions", {{"user_id", id}, {"scenario_id", "nope"}}).first == 404);
  CHECK(f.call("POST", "/sessions", {{"user_id", "ghost"}, {"scenario_id", "standard"}}).first == 404);
  CHECK(f.call("POST", "/sessions", {{"user_id", id}, {"exercise_id", "nope"}}).first == 404);
  CHECK(f.call("POST", "/sessions", {{"user_id", id}, {"exercise_id", "risk-basics"}}).first == 400);
  CHECK(f.call("POST", "/sessions", {{"scenario_id", "standard"}}).first >= 400);
  CHECK(f.call("GET", "/sessions/nope/replay").first == 404);
}

TEST_CASE("sessions: stream lifecycle, replay and simulation attempts") {
  Fixture f;
  const std::string id = f.new_user();
  auto [status, created] = f.call("POST", "/sessions", {{"user_id", id}, {"exercise_id", "sim-standard"}});
  REQUIRE(status == 201);
  const std::string sid = created["session_id"];
  CHECK(created["scenario_id"] == "standard");
  CHECK(created["stream"] == "/sessions/" + sid + "/stream");
  CHECK(Api::stream_target(created["stream"].get<std::string>()) == sid);
  CHECK_FALSE(Api::stream_target("/sessions/x").has_value());

  std::string why;
  auto live = f.api->attach_stream(sid, &why);
  REQUIRE(live);
  CHECK_FALSE(f.api->attach_stream(sid, &why));
  CHECK(why == "session already has a stream");
  {
    std::lock_guard lock(live->mutex);
    live->stream.handle_text(R"({"type":"fire"})");
    live->stream.handle_text(R"({"type":"end"})");
  }
  f.api->detach_stream(live);
  CHECK_FALSE(f.api->attach_stream(sid, &why));

  auto [rs, replay] = f.call("GET", "/sessions/" + sid + "/replay");
  CHECK(rs == 200);
  CHECK(replay["session"]["result"]["samples"].size() == 1);

  // The stream already recorded a simulation attempt; grading the session again works too.
  auto [as, attempt] = f.call("POST", "/exercises/sim-standard/attempts", {{"user_id", id}, {"inputs", {{"session_id", sid}}}});
  CHECK(as == 201);
  CHECK(attempt["detail"]["session_id"] == sid);
  const std::string other = f.new_user();
  CHECK(f.call("POST", "/exercises/sim-standard/attempts", {{"user_id", other}, {"inputs", {{"session_id", sid}}}})
            .second["error"]["field"] == "inputs.session_id");
  CHECK(f.call("GET", "/users/" + id + "/timeline").second["entries"].size() == 3);
}
