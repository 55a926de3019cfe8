#include "biopsym/session_store.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include "biopsym/error.hpp"
#include "biopsym/json_io.hpp"

namespace biopsym {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string random_id() {
  thread_local std::mt19937_64 rng([] {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd()};
    return std::mt19937_64(seq);
  }());
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return std::string(buf, 32);
}

void to_json(json& j, const UserProfile& u) {
  j = json{{"user_id", u.user_id}, {"display_name", u.display_name}, {"created_at_ms", u.created_at_ms}};
}

void from_json(const json& j, UserProfile& u) {
  u.user_id = j.at("user_id").get<std::string>();
  u.display_name = j.at("display_name").get<std::string>();
  u.created_at_ms = j.at("created_at_ms").get<std::int64_t>();
}

void to_json(json& j, const SessionRecord& s) {
  j = json{{"session_id", s.session_id},
           {"user_id", s.user_id},
           {"scenario_id", s.scenario_id},
           {"exercise_id", s.exercise_id},
           {"started_at_ms", s.started_at_ms},
           {"ended_at_ms", nullptr},
           {"result", s.result},
           {"assistance", {{"coronal", s.assistance.coronal}, {"3d", s.assistance.view_3d}}},
           {"score", s.score}};
  if (s.ended_at_ms) j["ended_at_ms"] = *s.ended_at_ms;
}

void from_json(const json& j, SessionRecord& s) {
  s.session_id = j.at("session_id").get<std::string>();
  s.user_id = j.at("user_id").get<std::string>();
  s.scenario_id = j.at("scenario_id").get<std::string>();
  s.exercise_id = j.value("exercise_id", std::string{});
  s.started_at_ms = j.at("started_at_ms").get<std::int64_t>();
  const auto& ended = j.at("ended_at_ms");
  s.ended_at_ms = ended.is_null() ? std::nullopt : std::optional<std::int64_t>(ended.get<std::int64_t>());
  s.result = j.at("result").get<ProtocolResult>();
  const auto& a = j.at("assistance");
  s.assistance.coronal = a.value("coronal", false);
  s.assistance.view_3d = a.value("3d", false);
  s.score = j.at("score").get<double>();
}

void to_json(json& j, const TimelineEntry& e) {
  j = json{{"timestamp_ms", e.timestamp_ms}, {"kind", e.kind}, {"ref_id", e.ref_id}, {"score", e.score}};
}

void to_json(json& j, const SeriesPoint& p) { j = json{{"timestamp_ms", p.timestamp_ms}, {"score", p.score}}; }

std::string_view to_string(Collection c) {
  switch (c) {
    case Collection::users: return "users";
    case Collection::attempts: return "attempts";
    case Collection::sessions: return "sessions";
  }
  return "users";
}

// ---------------------------------------------------------------------------

namespace {

std::uint32_t crc_of(const std::string& body) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
}

[[noreturn]] void throw_errno(const std::string& what) {
  throw Error(Errc::io_failure, what + ": " + std::strerror(errno));
}

}  // namespace

NdjsonBackend::NdjsonBackend(std::filesystem::path dir, bool sync_each_append)
    : dir_(std::move(dir)), sync_(sync_each_append) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create data dir " + dir_.string() + ": " + ec.message());
}

std::filesystem::path NdjsonBackend::file_of(Collection c) const {
  return dir_ / (std::string(to_string(c)) + ".ndjson");
}

std::string NdjsonBackend::encode_line(const json& record) {
  const std::string body = record.dump();
  json line;
  line["crc"] = crc_of(body);
  line["rec"] = record;
  return line.dump() + "\n";
}

void NdjsonBackend::append(Collection c, const json& record) {
  const std::string line = encode_line(record);
  const auto path = file_of(c);
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("cannot open " + path.string());
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw_errno("write to " + path.string() + " failed");
    }
    written += static_cast<std::size_t>(n);
  }
  if (sync_ && ::fdatasync(fd) != 0) {
    ::close(fd);
    throw_errno("fdatasync of " + path.string() + " failed");
  }
  ::close(fd);
}

std::vector<json> NdjsonBackend::load(Collection c) {
  const auto path = file_of(c);
  std::vector<json> records;
  if (!std::filesystem::exists(path)) return records;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    const std::size_t nl = data.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos) {
      // Interrupted append: drop the partial tail so later appends start clean.
      in.close();
      std::filesystem::resize_file(path, pos);
      ++recovered_tails_;
      break;
    }
    const std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    auto corrupt = [&](const std::string& why) {
      return Error(Errc::corrupt_record, path.string() + " line " + std::to_string(line_no) + ": " + why);
    };
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("crc") || !parsed.contains("rec")) {
      throw corrupt("unparseable record");
    }
    if (!parsed["crc"].is_number_unsigned() || parsed["crc"].get<std::uint32_t>() != crc_of(parsed["rec"].dump())) {
      throw corrupt("checksum mismatch");
    }
    records.push_back(std::move(parsed["rec"]));
  }
  return records;
}

// ---------------------------------------------------------------------------

SessionStore::SessionStore(std::unique_ptr<RecordBackend> backend) : backend_(std::move(backend)) {
  try {
    for (auto& j : backend_->load(Collection::users)) {
      users_.push_back(j.get<UserProfile>());
      user_index_[users_.back().user_id] = users_.size() - 1;
    }
    for (auto& j : backend_->load(Collection::attempts)) attempts_.push_back(j.get<Attempt>());
    for (auto& j : backend_->load(Collection::sessions)) {
      sessions_.push_back(j.get<SessionRecord>());
      session_index_[sessions_.back().session_id] = sessions_.size() - 1;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_record, std::string("record schema mismatch: ") + e.what());
  }
}

std::unique_ptr<SessionStore> SessionStore::open(const std::filesystem::path& dir, bool sync_each_append) {
  return std::make_unique<SessionStore>(std::make_unique<NdjsonBackend>(dir, sync_each_append));
}

UserProfile SessionStore::add_user(std::string display_name) {
  UserProfile user{random_id(), std::move(display_name), now_ms()};
  add_user(user);
  return user;
}

void SessionStore::add_user(const UserProfile& user) {
  if (user.user_id.empty()) throw Error(Errc::invalid_argument, "user id must not be empty");
  std::unique_lock lock(mutex_);
  if (user_index_.contains(user.user_id)) throw Error(Errc::invalid_argument, "duplicate user id " + user.user_id);
  backend_->append(Collection::users, json(user));
  users_.push_back(user);
  user_index_[user.user_id] = users_.size() - 1;
}

void SessionStore::require_user(std::string_view user_id) const {
  if (!user_index_.contains(user_id)) throw Error(Errc::unknown_reference, "unknown user " + std::string(user_id));
}

std::string SessionStore::record_attempt(Attempt attempt) {
  if (!(attempt.score >= 0.0 && attempt.score <= 1.0)) {
    throw Error(Errc::invalid_argument, "attempt score must be in [0, 1]");
  }
  if (attempt.exercise_id.empty()) throw Error(Errc::invalid_argument, "attempt needs an exercise id");
  if (attempt.attempt_id.empty()) attempt.attempt_id = random_id();
  if (attempt.timestamp_ms == 0) attempt.timestamp_ms = now_ms();
  std::unique_lock lock(mutex_);
  require_user(attempt.user_id);
  backend_->append(Collection::attempts, json(attempt));
  attempts_.push_back(std::move(attempt));
  return attempts_.back().attempt_id;
}

std::string SessionStore::record_session(SessionRecord session) {
  if (session.session_id.empty()) session.session_id = random_id();
  if (session.ended_at_ms && *session.ended_at_ms < session.started_at_ms) {
    throw Error(Errc::invalid_argument, "session ends before it starts");
  }
  std::unique_lock lock(mutex_);
  require_user(session.user_id);
  if (session_index_.contains(session.session_id)) {
    throw Error(Errc::invalid_argument, "session " + session.session_id + " already recorded");
  }
  backend_->append(Collection::sessions, json(session));
  sessions_.push_back(std::move(session));
  session_index_[sessions_.back().session_id] = sessions_.size() - 1;
  return sessions_.back().session_id;
}

std::optional<UserProfile> SessionStore::user(std::string_view user_id) const {
  std::shared_lock lock(mutex_);
  const auto it = user_index_.find(user_id);
  if (it == user_index_.end()) return std::nullopt;
  return users_[it->second];
}

bool SessionStore::has_user(std::string_view user_id) const {
  std::shared_lock lock(mutex_);
  return user_index_.contains(user_id);
}

std::vector<UserProfile> SessionStore::users() const {
  std::shared_lock lock(mutex_);
  return users_;
}

std::vector<Attempt> SessionStore::attempts() const {
  std::shared_lock lock(mutex_);
  return attempts_;
}

std::vector<Attempt> SessionStore::attempts_of(std::string_view user_id) const {
  std::shared_lock lock(mutex_);
  std::vector<Attempt> out;
  for (const auto& a : attempts_) {
    if (a.user_id == user_id) out.push_back(a);
  }
  return out;
}

std::vector<SessionRecord> SessionStore::sessions() const {
  std::shared_lock lock(mutex_);
  return sessions_;
}

std::vector<TimelineEntry> SessionStore::timeline(std::string_view user_id) const {
  std::shared_lock lock(mutex_);
  require_user(user_id);
  std::vector<TimelineEntry> out;
  for (const auto& a : attempts_) {
    if (a.user_id == user_id) out.push_back({a.timestamp_ms, std::string(to_string(a.kind)), a.attempt_id, a.score});
  }
  for (const auto& s : sessions_) {
    if (s.user_id == user_id) {
      out.push_back({s.ended_at_ms.value_or(s.started_at_ms), "session", s.session_id, s.score});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TimelineEntry& a, const TimelineEntry& b) { return a.timestamp_ms < b.timestamp_ms; });
  return out;
}

std::vector<SeriesPoint> SessionStore::score_series(std::string_view user_id, std::string_view kind) const {
  std::vector<SeriesPoint> out;
  for (const auto& e : timeline(user_id)) {
    if (e.kind == kind) out.push_back({e.timestamp_ms, e.score});
  }
  return out;
}

SessionRecord SessionStore::replay(std::string_view session_id) const {
  std::shared_lock lock(mutex_);
  const auto it = session_index_.find(session_id);
  if (it == session_index_.end()) throw Error(Errc::not_found, "unknown session " + std::string(session_id));
  return sessions_[it->second];
}

}  // namespace biopsym
