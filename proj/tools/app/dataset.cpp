#include "dataset.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "gom/error.hpp"

namespace gom::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const char* stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.png", stem, i);
  return buf;
}

const json& field(const json& j, const char* key, const fs::path& manifest) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(manifest.string() + ": missing field \"" + key + "\"");
  }
  return j.at(key);
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  json j;
  try {
    j = json::parse(read_text_file(manifest));
  } catch (const json::parse_error& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  if (field(j, "format", manifest) != "gom-frames") {
    throw FormatError(manifest.string() + ": not a frames manifest");
  }
  Dataset d;
  if (j.contains("initial_avatar")) {
    d.initial = load_avatar(dir / j.at("initial_avatar").get<std::string>());
  }
  const json& frames = field(j, "frames", manifest);
  if (!frames.is_array() || frames.empty()) {
    throw FormatError(manifest.string() + ": frames must be a nonempty array");
  }
  for (const json& f : frames) {
    FrameObservation obs;
    obs.image = read_png(dir / field(f, "image", manifest).get<std::string>(), 3);
    obs.mask = read_png(dir / field(f, "mask", manifest).get<std::string>(), 1);
    obs.pose = pose_from_json(field(f, "pose", manifest).dump());
    obs.camera = camera_from_json(field(f, "camera", manifest).dump());
    if (obs.image.width != obs.camera.width || obs.image.height != obs.camera.height ||
        !obs.mask.same_shape(Image(obs.image.width, obs.image.height, 1))) {
      throw DataError(manifest.string() + ": frame " + std::to_string(d.frames.size()) +
                      " resolution does not match its camera");
    }
    d.frames.push_back(std::move(obs));
  }
  return d;
}

void save_dataset(const fs::path& dir, const std::vector<FrameObservation>& frames,
                  const AvatarBundle* initial) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
  json j;
  j["format"] = "gom-frames";
  j["version"] = 1;
  if (initial) {
    save_avatar(initial->avatar, initial->nets, dir / "initial.goma");
    j["initial_avatar"] = "initial.goma";
  }
  j["frames"] = json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string image = numbered("image", i), mask = numbered("mask", i);
    write_png(frames[i].image, dir / image);
    write_png(frames[i].mask, dir / mask);
    j["frames"].push_back({{"image", image},
                           {"mask", mask},
                           {"pose", json::parse(pose_to_json(frames[i].pose))},
                           {"camera", json::parse(camera_to_json(frames[i].camera))}});
  }
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace gom::app
