#include "session.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "gom/error.hpp"

namespace gom::app {

using nlohmann::json;

namespace {

constexpr std::size_t kFpsWindow = 30;

constexpr RenderMode kModes[] = {RenderMode::final_image, RenderMode::albedo, RenderMode::shading,
                                 RenderMode::normal, RenderMode::mask};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

RenderedFrame render_view(const AvatarBundle& avatar, const ViewState& state) {
  RenderOptions o;
  o.refine = state.refine;
  o.background = state.background;
  const auto t0 = std::chrono::steady_clock::now();
  const RenderOutput out = render(avatar.avatar, avatar.nets, state.pose, state.camera, o);
  RenderedFrame f;
  f.width = state.camera.width;
  f.height = state.camera.height;
  f.rgba = to_rgba8(out, state.mode, state.background);
  f.gaussian_count = out.gaussian_count;
  f.render_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return f;
}

Framing default_framing(const Avatar& avatar, int width, int height) {
  const auto p = avatar.positions();
  if (p.empty()) throw ArgumentError("default_camera: avatar has no vertices");
  if (width <= 0 || height <= 0) throw ArgumentError("default_camera: size must be positive");
  Vec3 lo = p[0], hi = p[0];
  for (const Vec3& x : p) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  const double radius = std::max(0.5 * (hi - lo).norm(), 1e-3);
  const double aspect = std::min(1.0, static_cast<double>(width) / height);
  return {0.5 * (lo + hi), 1.1 * radius / std::sin(0.5 * kDefaultFov * aspect)};
}

Camera default_camera(const Avatar& avatar, int width, int height) {
  const Framing f = default_framing(avatar, width, height);
  return orbit_camera(f.center, f.distance, 0.0, 0.0, width, height, kDefaultFov);
}

std::vector<std::uint8_t> encode_frame(const RenderedFrame& frame, FrameFormat format) {
  std::vector<std::uint8_t> out(kFrameMagic, kFrameMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(frame.width));
  put_u32(out, static_cast<std::uint32_t>(frame.height));
  put_u32(out, static_cast<std::uint32_t>(format));
  if (format == FrameFormat::png) {
    const auto png = encode_png_rgba8(frame.rgba, frame.width, frame.height);
    out.insert(out.end(), png.begin(), png.end());
  } else {
    out.insert(out.end(), frame.rgba.begin(), frame.rgba.end());
  }
  return out;
}

std::optional<FrameHeader> parse_frame_header(std::span<const std::uint8_t> m) {
  if (m.size() < kFrameHeaderSize || std::memcmp(m.data(), kFrameMagic, 4) != 0) return std::nullopt;
  FrameHeader h;
  h.width = get_u32(m.data() + 4);
  h.height = get_u32(m.data() + 8);
  const std::uint32_t format = get_u32(m.data() + 12);
  if (format > 1) return std::nullopt;
  h.format = static_cast<FrameFormat>(format);
  return h;
}

std::string error_json(std::string_view code, std::string_view message) {
  return json{{"type", "error"}, {"code", code}, {"message", message}}.dump();
}

Session::Session(std::shared_ptr<const AvatarBundle> avatar, ViewState initial)
    : avatar_(std::move(avatar)), state_(std::move(initial)) {
  if (state_.pose.joint_count() != avatar_->avatar.rig.joint_count()) {
    throw ArgumentError("session: initial pose does not match the rig");
  }
  validate(state_.camera);
}

std::string Session::hello_json() const {
  const Rig& rig = avatar_->avatar.rig;
  json modes = json::array();
  for (RenderMode m : kModes) modes.push_back(std::string(to_string(m)));
  return json{{"type", "hello"},
              {"protocol", 1},
              {"joints", rig.joint_count()},
              {"names", rig.names},
              {"parents", rig.parents},
              {"camera", json::parse(camera_to_json(state_.camera))},
              {"pose", json::parse(pose_to_json(state_.pose))},
              {"mode", std::string(to_string(state_.mode))},
              {"modes", modes},
              {"format", format_ == FrameFormat::png ? "png" : "raw"},
              {"gaussian_count", avatar_->avatar.faces.size()}}
      .dump();
}

std::string Session::stats_json() const {
  double fps = 0.0;
  if (frame_times_.size() >= 2) {
    const double span =
        std::chrono::duration<double>(frame_times_.back() - frame_times_.front()).count();
    if (span > 0.0) fps = static_cast<double>(frame_times_.size() - 1) / span;
  }
  return json{{"type", "stats"},
              {"fps", fps},
              {"gaussian_count", last_gaussians_},
              {"render_ms", last_render_ms_},
              {"frames", frames_sent_}}
      .dump();
}

void Session::record_frame(const RenderedFrame& frame) {
  frame_times_.push_back(std::chrono::steady_clock::now());
  if (frame_times_.size() > kFpsWindow) frame_times_.pop_front();
  ++frames_sent_;
  last_gaussians_ = frame.gaussian_count;
  last_render_ms_ = frame.render_ms;
}

Session::Outcome Session::handle(std::string_view text) {
  Outcome out;
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    out.replies.push_back(error_json("bad_message", e.what()));
    return out;
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    out.replies.push_back(error_json("bad_message", "expected an object with a string \"type\""));
    return out;
  }
  const std::string type = msg["type"];
  const json& body = msg.contains("payload") && msg["payload"].is_object() ? msg["payload"] : msg;
  auto ack = [&] {
    ++version_;
    out.replies.push_back(json{{"type", "ack"}, {"of", type}, {"version", version_}}.dump());
    out.render = true;
  };

  if (type == "hello") {
    if (body.contains("format")) {
      const json& f = body["format"];
      if (f == "png") {
        format_ = FrameFormat::png;
      } else if (f == "raw") {
        format_ = FrameFormat::rgba8;
      } else {
        out.replies.push_back(error_json("bad_format", "format must be \"raw\" or \"png\""));
        return out;
      }
    }
    out.replies.push_back(hello_json());
    out.render = true;
  } else if (type == "pose") {
    try {
      json p = body;
      if (p.contains("pose")) p = p["pose"];
      if (!p.contains("root_translation")) p["root_translation"] = {0.0, 0.0, 0.0};
      Pose pose = pose_from_json(p.dump());
      if (pose.joint_count() != avatar_->avatar.rig.joint_count()) {
        out.replies.push_back(error_json(
            "bad_pose", "pose has " + std::to_string(pose.joint_count()) + " joints, rig has " +
                            std::to_string(avatar_->avatar.rig.joint_count())));
        return out;
      }
      bool finite = pose.root_translation.allFinite();
      for (const Vec3& r : pose.local_rotations) finite = finite && r.allFinite();
      if (!finite) {
        out.replies.push_back(error_json("bad_pose", "pose values must be finite"));
        return out;
      }
      state_.pose = std::move(pose);
    } catch (const std::exception& e) {
      out.replies.push_back(error_json("bad_pose", e.what()));
      return out;
    }
    ack();
  } else if (type == "camera") {
    try {
      const json& c = body.contains("camera") ? body["camera"] : body;
      json fields = c;
      fields.erase("type");
      fields.erase("payload");
      state_.camera = camera_from_json(fields.dump());
    } catch (const std::exception& e) {
      out.replies.push_back(error_json("bad_camera", e.what()));
      return out;
    }
    ack();
  } else if (type == "mode") {
    std::optional<RenderMode> mode;
    if (body.contains("mode") && body["mode"].is_string()) {
      mode = parse_render_mode(body["mode"].get<std::string>());
    }
    if (!mode) {
      out.replies.push_back(error_json("bad_mode", "mode must be one of final, albedo, shading, normal, mask"));
      return out;
    }
    if (body.contains("background")) {
      const json& bg = body["background"];
      if (!bg.is_array() || bg.size() != 3 ||
          !std::all_of(bg.begin(), bg.end(), [](const json& v) { return v.is_number(); })) {
        out.replies.push_back(error_json("bad_mode", "background must be 3 numbers"));
        return out;
      }
      state_.background = Vec3(bg[0].get<double>(), bg[1].get<double>(), bg[2].get<double>());
    }
    state_.mode = *mode;
    ack();
  } else if (type == "stats_request") {
    out.replies.push_back(stats_json());
  } else {
    out.replies.push_back(error_json("unknown_type", "unknown message type \"" + type + "\""));
  }
  return out;
}

}  // namespace gom::app
