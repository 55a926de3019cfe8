#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "biopsym/scenario.hpp"
#include "biopsym/session_store.hpp"

namespace biopsym {

using Clock = std::function<std::int64_t()>;  // epoch milliseconds

// Wire format of a frame message, little-endian:
//   u32 width, u32 height, f32 mm_per_px, width*height u8 pixels (row-major).
std::string encode_frame(const SliceImage& img);

struct DecodedFrame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  float mm_per_px = 0.0f;
  std::vector<std::uint8_t> pixels;
};

/// Throws Error{truncated_payload} when the buffer does not match its header.
DecodedFrame decode_frame(std::string_view bytes);

/// Outgoing message: a binary frame or a JSON text message.
struct OutMessage {
  bool binary = false;
  std::string payload;
};

/// Server side of one live session. Messages are processed strictly in
/// arrival order; the state only moves created -> streaming -> ended.
///
/// Client messages (JSON, "type" field):
///   pose   {position: [x,y,z], orientation: [w,x,y,z]}  -> frame (+ coronal frame)
///   fire   {insertion_mm?}                               -> sample
///   assist {view: "coronal"|"3d", on: bool}              -> ack
///   end    {}                                            -> result
/// Anything malformed or out of turn gets an error message; the session
/// itself survives it.
class StreamSession {
 public:
  enum class State { created, streaming, ended };

  struct Options {
    std::string session_id;
    std::string user_id;
    std::string exercise_id;
    std::optional<ExerciseDef> exercise;  // guided_simulation grading and view constraints
    SimulationWeights weights{};
    Clock clock;
  };

  /// store may be null, in which case nothing is persisted.
  StreamSession(std::shared_ptr<const LoadedScenario> scenario, std::shared_ptr<SessionStore> store, Options opts);

  std::vector<OutMessage> handle_text(std::string_view text);
  std::vector<OutMessage> handle_binary(std::string_view bytes);

  State state() const { return state_; }
  const std::string& session_id() const { return opts_.session_id; }
  const std::vector<BiopsySample>& samples() const { return samples_; }
  const ProbePose& pose() const { return pose_; }
  const std::optional<SessionRecord>& record() const { return record_; }

  /// Slice at the current pose, sector-masked.
  SliceImage current_frame() const;
  /// World coronal plane (normal along the medial-lateral axis) through the
  /// gland center.
  SliceImage coronal_frame() const;

 private:
  std::vector<OutMessage> on_pose(const nlohmann::json& msg);
  std::vector<OutMessage> on_fire(const nlohmann::json& msg);
  std::vector<OutMessage> on_assist(const nlohmann::json& msg);
  std::vector<OutMessage> on_end();

  std::shared_ptr<const LoadedScenario> scenario_;
  std::shared_ptr<SessionStore> store_;
  Options opts_;
  State state_ = State::created;
  std::int64_t started_at_ms_ = 0;
  ProbePose pose_{};
  bool coronal_on_ = false;
  AssistanceUsage usage_{};
  std::vector<BiopsySample> samples_;
  std::optional<SessionRecord> record_;
};

std::string_view to_string(StreamSession::State s);

nlohmann::json error_message(std::string_view code, std::string_view text);

}  // namespace biopsym
