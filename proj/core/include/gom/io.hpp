#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gom/articulator.hpp"
#include "gom/camera.hpp"
#include "gom/image.hpp"
#include "gom/model.hpp"

namespace gom {

struct AvatarBundle {
  Avatar avatar;
  Networks nets;

  bool operator==(const AvatarBundle&) const = default;
};

inline constexpr std::uint32_t kAvatarFormatVersion = 1;

/// Binary avatar layout, little-endian, 32-bit floats:
///   "GOMA" | version u32 | V u32 | F u32 | J u32 | epsilon f32 | subdivision level u32 |
///   reserved u32 | positions V*3 | weights V*J | face indices F*3 u32 | rotations F*3 |
///   log-scales F*3 | color logits F*3 | deformer, refiner, shading blocks | rig block.
/// A network block is a layer count u32 followed per layer by rows u32, cols u32,
/// row-major weights and biases. The rig block holds J u32, parents i32, rest
/// rotations J*9 (row-major), rest translations J*3, then per joint a u32 byte
/// length and the UTF-8 name.
std::vector<std::uint8_t> encode_avatar(const Avatar& avatar, const Networks& nets);

/// Throws FormatError (with byte offset) on malformed bytes and DataError when
/// the decoded avatar fails validation.
AvatarBundle decode_avatar(std::span<const std::uint8_t> bytes);

void save_avatar(const Avatar& avatar, const Networks& nets, const std::filesystem::path& path);
AvatarBundle load_avatar(const std::filesystem::path& path);

/// Rounds every stored value through 32-bit float, matching what a save/load returns.
AvatarBundle quantize_to_file_precision(const AvatarBundle& bundle);

// Human-readable JSON formats.
//   pose:     {"root_translation": [x,y,z], "rotations": [[x,y,z], ...]}
//   sequence: {"frames": [{"time": t, "pose": <pose>}, ...]}
//   camera:   {"fx","fy","cx","cy","width","height","rotation": [9 row-major],"translation": [3]}
//   rig:      {"joints": [{"name","parent","rest_rotation": [9],"rest_translation": [3]}, ...]}

struct TimedPose {
  double time = 0.0;
  Pose pose;

  bool operator==(const TimedPose&) const = default;
};

std::string pose_to_json(const Pose& pose);
Pose pose_from_json(const std::string& text);
std::string pose_sequence_to_json(std::span<const TimedPose> frames);
/// Throws FormatError on non-increasing times; ArgumentError when `joint_count`
/// is nonzero and a pose disagrees with it.
std::vector<TimedPose> pose_sequence_from_json(const std::string& text,
                                               std::size_t joint_count = 0);
std::string camera_to_json(const Camera& camera);
Camera camera_from_json(const std::string& text);
std::string rig_to_json(const Rig& rig);
Rig rig_from_json(const std::string& text);

Pose load_pose(const std::filesystem::path& path);
void save_pose(const Pose& pose, const std::filesystem::path& path);
std::vector<TimedPose> load_pose_sequence(const std::filesystem::path& path,
                                          std::size_t joint_count = 0);
void save_pose_sequence(std::span<const TimedPose> frames, const std::filesystem::path& path);
Camera load_camera(const std::filesystem::path& path);
void save_camera(const Camera& camera, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

// 8-bit PNG images. Values are linear in [0, 1]; no gamma conversion.

/// Clamps to [0, 1] and rounds. Accepts 1, 3 or 4 channels.
std::vector<std::uint8_t> encode_png(const Image& image);
std::vector<std::uint8_t> encode_png_rgba8(std::span<const std::uint8_t> rgba, int width, int height);
/// Decodes to `channels` (1, 3 or 4) channels, converting as needed.
Image decode_png(std::span<const std::uint8_t> bytes, int channels);
void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path, int channels);

}  // namespace gom
