#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "biopsym/exercises.hpp"
#include "biopsym/scenario.hpp"
#include "biopsym/session_store.hpp"
#include "biopsym/stream_session.hpp"

namespace biopsym {

inline constexpr std::string_view kVersion = "0.3.0";

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// A created session waiting for, or holding, its single stream connection.
struct LiveSession {
  std::mutex mutex;
  StreamSession stream;
  bool attached = false;

  LiveSession(std::shared_ptr<const LoadedScenario> scenario, std::shared_ptr<SessionStore> store,
              StreamSession::Options opts)
      : stream(std::move(scenario), std::move(store), std::move(opts)) {}
};

/// Transport-free REST router plus the registry of live sessions. Errors are
/// JSON bodies {"error": {"code", "text", "field"?}}.
///
///   GET  /health
///   POST /users                          {display_name}
///   GET  /users/{id}
///   GET  /users/{id}/timeline
///   GET  /users/{id}/series?kind=K
///   GET  /users/{id}/recommendations
///   GET  /scenarios, /scenarios/{id}, /scenarios/{id}/mesh
///   GET  /exercises, /content
///   POST /exercises/{id}/attempts        {user_id, inputs}
///   POST /sessions                       {user_id, scenario_id?, exercise_id?}
///   GET  /sessions/{id}/replay
class Api {
 public:
  /// Throws ValidationError when an exercise names an unknown scenario.
  Api(ScenarioCatalog scenarios, ExerciseCatalog exercises, std::shared_ptr<SessionStore> store, Clock clock = {});

  HttpResponse handle(std::string_view method, std::string_view target, std::string_view body);

  /// Claims the stream of a created session. Empty (with an error message in
  /// *why) when the session is unknown, ended or already attached.
  std::shared_ptr<LiveSession> attach_stream(std::string_view session_id, std::string* why = nullptr);
  void detach_stream(const std::shared_ptr<LiveSession>& live);

  /// Session id from "/sessions/{id}/stream", if the target has that shape.
  static std::optional<std::string> stream_target(std::string_view target);

  const ScenarioCatalog& scenarios() const { return scenarios_; }
  const ExerciseCatalog& exercises() const { return exercises_; }
  SessionStore& store() { return *store_; }

 private:
  HttpResponse create_user(const nlohmann::json& body);
  HttpResponse create_session(const nlohmann::json& body);
  HttpResponse post_attempt(std::string_view exercise_id, const nlohmann::json& body);
  Attempt grade_attempt(const ExerciseDef& ex, const std::string& user_id, const nlohmann::json& inputs);

  ScenarioCatalog scenarios_;
  ExerciseCatalog exercises_;
  std::shared_ptr<SessionStore> store_;
  Clock clock_;
  std::mutex live_mutex_;
  std::map<std::string, std::shared_ptr<LiveSession>, std::less<>> live_;
};

/// Exercise catalog file ({"exercises": [...], ...}); validated on load.
ExerciseCatalog load_exercise_catalog(const std::filesystem::path& path);

}  // namespace biopsym
