#include "biopsym/stream_session.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "biopsym/error.hpp"
#include "biopsym/json_io.hpp"

namespace biopsym {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + k])) << (8 * k);
  return v;
}

// Clients send quaternions with a few decimals; anything reasonably close to
// unit length is renormalized, exact ones pass through untouched.
constexpr double kQuatSlack = 1e-3;

}  // namespace

std::string encode_frame(const SliceImage& img) {
  std::string out;
  out.reserve(12 + img.pixels.size());
  put_u32(out, static_cast<std::uint32_t>(img.px_w));
  put_u32(out, static_cast<std::uint32_t>(img.px_h));
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(img.mm_per_px_u)));
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

DecodedFrame decode_frame(std::string_view bytes) {
  if (bytes.size() < 12) throw Error(Errc::truncated_payload, "frame shorter than its header");
  DecodedFrame f;
  f.width = get_u32(bytes, 0);
  f.height = get_u32(bytes, 4);
  f.mm_per_px = std::bit_cast<float>(get_u32(bytes, 8));
  const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
  if (bytes.size() != 12 + n) throw Error(Errc::truncated_payload, "frame payload does not match its header");
  f.pixels.assign(bytes.begin() + 12, bytes.end());
  return f;
}

json error_message(std::string_view code, std::string_view text) {
  return json{{"type", "error"}, {"code", code}, {"text", text}};
}

std::string_view to_string(StreamSession::State s) {
  switch (s) {
    case StreamSession::State::created: return "created";
    case StreamSession::State::streaming: return "streaming";
    case StreamSession::State::ended: return "ended";
  }
  return "created";
}

StreamSession::StreamSession(std::shared_ptr<const LoadedScenario> scenario, std::shared_ptr<SessionStore> store,
                             Options opts)
    : scenario_(std::move(scenario)), store_(std::move(store)), opts_(std::move(opts)) {
  if (!scenario_) throw Error(Errc::invalid_argument, "stream session needs a scenario");
  if (!opts_.clock) opts_.clock = now_ms;
  if (opts_.exercise) opts_.weights = opts_.exercise->grading.weights;
  opts_.weights.validate();
  started_at_ms_ = opts_.clock();
}

static OutMessage text_message(const json& j) { return OutMessage{false, j.dump()}; }

std::vector<OutMessage> StreamSession::handle_binary(std::string_view) {
  if (state_ == State::ended) return {text_message(error_message("session_ended", "session already ended"))};
  return {text_message(error_message("malformed", "binary client messages are not supported"))};
}

std::vector<OutMessage> StreamSession::handle_text(std::string_view text) {
  if (state_ == State::ended) return {text_message(error_message("session_ended", "session already ended"))};

  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::exception&) {
    return {text_message(error_message("malformed", "message is not valid JSON"))};
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return {text_message(error_message("malformed", "message needs a string \"type\""))};

  const auto type = msg["type"].get<std::string>();
  try {
    if (type == "pose") return on_pose(msg);
    if (type == "fire") return on_fire(msg);
    if (type == "assist") return on_assist(msg);
    if (type == "end") return on_end();
  } catch (const Error& e) {
    return {text_message(error_message(to_string(e.code()), e.what()))};
  } catch (const std::exception& e) {
    return {text_message(error_message("malformed", e.what()))};
  }
  return {text_message(error_message("malformed", "unknown message type: " + type))};
}

SliceImage StreamSession::current_frame() const {
  const auto& def = scenario_->def;
  const SlicePlane plane =
      image_plane_of(def.probe, pose_, def.slice.width_mm, def.slice.height_mm, def.slice.px_w, def.slice.px_h);
  return apply_sector_mask(extract_slice(*scenario_->volume, plane), def.slice.sector());
}

SliceImage StreamSession::coronal_frame() const {
  const auto& def = scenario_->def;
  const Aabb& box = scenario_->prostate->box;
  SlicePlane plane;
  plane.center = box.min + 0.5 * box.extent();
  plane.u_axis = Vec3::Unit(def.prostate.axes.side.axis);
  plane.v_axis = Vec3::Unit(def.prostate.axes.cranio_caudal.axis);
  plane.width_mm = def.slice.width_mm;
  plane.height_mm = def.slice.height_mm;
  plane.px_w = def.slice.px_w;
  plane.px_h = def.slice.px_h;
  return extract_slice(*scenario_->volume, plane);
}

std::vector<OutMessage> StreamSession::on_pose(const json& msg) {
  DevicePose dev;
  try {
    dev = msg.get<DevicePose>();
  } catch (const std::exception& e) {
    return {text_message(error_message("malformed", std::string("pose: ") + e.what()))};
  }
  const double norm = dev.orientation.norm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kQuatSlack)
    return {text_message(error_message("invalid_argument", "orientation must be a unit quaternion"))};
  if (std::abs(norm - 1.0) > 1e-9) dev.orientation.normalize();
  dev.validate();

  state_ = State::streaming;
  pose_ = constrain_pose(scenario_->def.probe, dev);
  std::vector<OutMessage> out;
  out.push_back(OutMessage{true, encode_frame(current_frame())});
  if (coronal_on_) out.push_back(OutMessage{true, encode_frame(coronal_frame())});
  return out;
}

std::vector<OutMessage> StreamSession::on_fire(const json& msg) {
  double insertion = scenario_->def.default_insertion_mm;
  if (msg.contains("insertion_mm")) {
    if (!msg["insertion_mm"].is_number())
      return {text_message(error_message("malformed", "insertion_mm must be a number"))};
    insertion = msg["insertion_mm"].get<double>();
  }
  if (!std::isfinite(insertion) || insertion < 0.0)
    return {text_message(error_message("invalid_argument", "insertion_mm must be >= 0"))};

  state_ = State::streaming;
  const auto& def = scenario_->def;
  BiopsySample s = fire_biopsy(def.needle, guide_line_of(def.probe, pose_), insertion, *scenario_->prostate);
  s.order_index = static_cast<int>(samples_.size());
  s.fire_pose = pose_;
  s.timestamp_ms = opts_.clock() - started_at_ms_;
  samples_.push_back(s);
  return {text_message(json{{"type", "sample"}, {"sample", s}})};
}

std::vector<OutMessage> StreamSession::on_assist(const json& msg) {
  if (!msg.contains("view") || !msg["view"].is_string() || !msg.contains("on") || !msg["on"].is_boolean())
    return {text_message(error_message("malformed", "assist needs view and on"))};
  const auto view = msg["view"].get<std::string>();
  const bool on = msg["on"].get<bool>();
  const auto& def = scenario_->def;
  const auto& ex = opts_.exercise;

  bool allowed = false;
  if (view == "coronal") {
    allowed = def.allow_coronal && (!ex || ex->constraints.coronal_view);
  } else if (view == "3d") {
    allowed = def.allow_3d && (!ex || ex->constraints.view_3d);
  } else {
    return {text_message(error_message("malformed", "view must be coronal or 3d"))};
  }
  if (on && !allowed) return {text_message(error_message("not_allowed", view + " view is not allowed here"))};

  state_ = State::streaming;
  if (view == "coronal") {
    coronal_on_ = on;
    usage_.coronal = usage_.coronal || on;
  } else {
    usage_.view_3d = usage_.view_3d || on;
  }
  return {text_message(json{{"type", "ack"}, {"of", "assist"}, {"view", view}, {"on", on}})};
}

std::vector<OutMessage> StreamSession::on_end() {
  const auto& def = scenario_->def;
  SessionRecord rec;
  rec.session_id = opts_.session_id;
  rec.user_id = opts_.user_id;
  rec.scenario_id = def.id;
  rec.exercise_id = opts_.exercise_id;
  rec.started_at_ms = started_at_ms_;
  rec.ended_at_ms = std::max(opts_.clock(), started_at_ms_);
  rec.result = evaluate_protocol(samples_, def.canonical_order, def.targets);
  rec.assistance = usage_;
  rec.score = grade_simulation(rec.result, opts_.weights);
  state_ = State::ended;
  record_ = rec;

  std::vector<OutMessage> out;
  if (store_) {
    try {
      store_->record_session(rec);
      if (opts_.exercise && opts_.exercise->kind == ExerciseKind::guided_simulation) {
        Attempt a;
        a.user_id = rec.user_id;
        a.exercise_id = opts_.exercise->id;
        a.kind = ExerciseKind::guided_simulation;
        a.timestamp_ms = *rec.ended_at_ms;
        a.inputs = json{{"session_id", rec.session_id}};
        a.score = rec.score;
        a.detail = json{{"session_id", rec.session_id},
                        {"coverage", rec.result.coverage},
                        {"order_score", rec.result.order_score},
                        {"zone_hit_map", zone_map_to_json(rec.result.zone_hit_map)}};
        store_->record_attempt(a);
      }
    } catch (const std::exception& e) {
      out.push_back(text_message(error_message("storage_failure", e.what())));
    }
  }
  out.insert(out.begin(), text_message(json{{"type", "result"},
                                            {"session_id", rec.session_id},
                                            {"result", rec.result},
                                            {"score", rec.score},
                                            {"assistance", {{"coronal", rec.assistance.coronal}, {"3d", rec.assistance.view_3d}}}}));
  return out;
}

}  // namespace biopsym
