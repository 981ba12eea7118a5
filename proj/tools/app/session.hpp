#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gom/io.hpp"
#include "gom/render.hpp"

namespace gom::app {

enum class FrameFormat : std::uint32_t { rgba8 = 0, png = 1 };

/// Everything that determines one displayed frame.
struct ViewState {
  Pose pose;
  Camera camera;
  RenderMode mode = RenderMode::final_image;
  Vec3 background = Vec3::Zero();
  bool refine = false;
};

struct RenderedFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;
  std::size_t gaussian_count = 0;
  double render_ms = 0.0;
};

/// The frame `gom render` writes for the same state.
RenderedFrame render_view(const AvatarBundle& avatar, const ViewState& state);

inline constexpr double kDefaultFov = 0.8;

/// Orbit target and distance that fit the rest-pose bounding box in view.
struct Framing {
  Vec3 center;
  double distance = 0.0;
};

Framing default_framing(const Avatar& avatar, int width, int height);

/// Front view (azimuth 0, elevation 0) of default_framing.
Camera default_camera(const Avatar& avatar, int width, int height);

inline constexpr char kFrameMagic[4] = {'G', 'O', 'M', 'F'};
inline constexpr std::size_t kFrameHeaderSize = 16;

struct FrameHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  FrameFormat format = FrameFormat::rgba8;
};

/// "GOMF" | width u32 | height u32 | format u32, little-endian, then the payload.
std::vector<std::uint8_t> encode_frame(const RenderedFrame& frame, FrameFormat format);
std::optional<FrameHeader> parse_frame_header(std::span<const std::uint8_t> message);

/// Protocol state of one viewer connection. Text messages are JSON objects
/// with a "type" of hello, pose, camera, mode or stats_request; fields may sit
/// at the top level or inside a "payload" object. Not thread-safe: the server
/// calls it from one strand.
class Session {
 public:
  Session(std::shared_ptr<const AvatarBundle> avatar, ViewState initial);

  struct Outcome {
    std::vector<std::string> replies;
    bool render = false;  // the state changed or a first frame is due
  };

  Outcome handle(std::string_view text);

  const ViewState& state() const { return state_; }
  std::uint64_t version() const { return version_; }
  FrameFormat format() const { return format_; }
  const AvatarBundle& avatar() const { return *avatar_; }
  std::shared_ptr<const AvatarBundle> avatar_ptr() const { return avatar_; }

  void record_frame(const RenderedFrame& frame);
  std::string stats_json() const;

 private:
  std::string hello_json() const;

  std::shared_ptr<const AvatarBundle> avatar_;
  ViewState state_;
  FrameFormat format_ = FrameFormat::rgba8;
  std::uint64_t version_ = 0;
  std::deque<std::chrono::steady_clock::time_point> frame_times_;
  std::size_t frames_sent_ = 0;
  std::size_t last_gaussians_ = 0;
  double last_render_ms_ = 0.0;
};

/// {"type": "error", "code": ..., "message": ...}
std::string error_json(std::string_view code, std::string_view message);

}  // namespace gom::app
