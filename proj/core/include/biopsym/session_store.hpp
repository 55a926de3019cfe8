#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "biopsym/biopsy.hpp"
#include "biopsym/exercises.hpp"

namespace biopsym {

std::int64_t now_ms();

/// Random 128-bit identifier as 32 lowercase hex digits.
std::string random_id();

struct UserProfile {
  std::string user_id;
  std::string display_name;
  std::int64_t created_at_ms = 0;

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct AssistanceUsage {
  bool coronal = false;
  bool view_3d = false;

  friend bool operator==(const AssistanceUsage&, const AssistanceUsage&) = default;
};

struct SessionRecord {
  std::string session_id;
  std::string user_id;
  std::string scenario_id;
  std::string exercise_id;  // empty for free practice
  std::int64_t started_at_ms = 0;
  std::optional<std::int64_t> ended_at_ms;
  ProtocolResult result;  // holds the ordered sample list
  AssistanceUsage assistance;
  double score = 0.0;
};

struct TimelineEntry {
  std::int64_t timestamp_ms = 0;
  std::string kind;  // exercise kind, or "session"
  std::string ref_id;
  double score = 0.0;

  friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

struct SeriesPoint {
  std::int64_t timestamp_ms = 0;
  double score = 0.0;

  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

void to_json(nlohmann::json& j, const UserProfile& u);
void from_json(const nlohmann::json& j, UserProfile& u);
void to_json(nlohmann::json& j, const SessionRecord& s);
void from_json(const nlohmann::json& j, SessionRecord& s);
void to_json(nlohmann::json& j, const TimelineEntry& e);
void to_json(nlohmann::json& j, const SeriesPoint& p);

enum class Collection { users, attempts, sessions };

std::string_view to_string(Collection c);

/// Append-only record storage. Implementations never rewrite a completed
/// record.
class RecordBackend {
 public:
  virtual ~RecordBackend() = default;

  virtual void append(Collection c, const nlohmann::json& record) = 0;
  /// All completed records in insertion order.
  virtual std::vector<nlohmann::json> load(Collection c) = 0;
};

/// One newline-delimited JSON file per collection under a data directory:
/// users.ndjson, attempts.ndjson, sessions.ndjson. Each line is
/// {"crc": <crc32 of rec.dump()>, "rec": {...}}.
///
/// A final line without its terminating newline is an interrupted write: it is
/// skipped and cut off on load. Any other unreadable line is Errc::corrupt_record.
class NdjsonBackend final : public RecordBackend {
 public:
  explicit NdjsonBackend(std::filesystem::path dir, bool sync_each_append = true);

  void append(Collection c, const nlohmann::json& record) override;
  std::vector<nlohmann::json> load(Collection c) override;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path file_of(Collection c) const;
  /// Interrupted tail records dropped by load() so far.
  int recovered_tails() const { return recovered_tails_; }

  static std::string encode_line(const nlohmann::json& record);

 private:
  std::filesystem::path dir_;
  bool sync_;
  int recovered_tails_ = 0;
};

/// Users, attempts and sessions with the history queries built on them.
/// Writes are serialized internally; queries return copies.
class SessionStore {
 public:
  explicit SessionStore(std::unique_ptr<RecordBackend> backend);

  /// Opens (creating if needed) an NDJSON store in dir.
  static std::unique_ptr<SessionStore> open(const std::filesystem::path& dir, bool sync_each_append = true);

  UserProfile add_user(std::string display_name);
  /// Throws Error{invalid_argument} on a duplicate id.
  void add_user(const UserProfile& user);

  /// Assigns attempt_id/timestamp when empty. Throws Error{unknown_reference}
  /// for an unknown user and Error{invalid_argument} for a score outside [0,1].
  std::string record_attempt(Attempt attempt);
  std::string record_session(SessionRecord session);

  std::optional<UserProfile> user(std::string_view user_id) const;
  bool has_user(std::string_view user_id) const;
  std::vector<UserProfile> users() const;
  std::vector<Attempt> attempts() const;
  std::vector<Attempt> attempts_of(std::string_view user_id) const;
  std::vector<SessionRecord> sessions() const;

  /// Throws Error{unknown_reference} for an unknown user.
  std::vector<TimelineEntry> timeline(std::string_view user_id) const;
  std::vector<SeriesPoint> score_series(std::string_view user_id, std::string_view kind) const;

  /// Throws Error{not_found} for an unknown session.
  SessionRecord replay(std::string_view session_id) const;

 private:
  void require_user(std::string_view user_id) const;

  mutable std::shared_mutex mutex_;
  std::unique_ptr<RecordBackend> backend_;
  std::vector<UserProfile> users_;
  std::vector<Attempt> attempts_;
  std::vector<SessionRecord> sessions_;
  std::map<std::string, std::size_t, std::less<>> user_index_;
  std::map<std::string, std::size_t, std::less<>> session_index_;
};

}  // namespace biopsym
