#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "gom/fit.hpp"
#include "gom/io.hpp"

namespace gom::app {

// A frames directory holds manifest.json plus 8-bit PNG images and masks:
//   {"format": "gom-frames", "version": 1, "initial_avatar": "initial.goma",
//    "frames": [{"image": "...", "mask": "...", "pose": <pose>, "camera": <camera>}]}
// "initial_avatar" is optional.
struct Dataset {
  std::vector<FrameObservation> frames;
  std::optional<AvatarBundle> initial;
};

Dataset load_dataset(const std::filesystem::path& dir);

/// Writes images as image_NNN.png and masks as mask_NNN.png.
void save_dataset(const std::filesystem::path& dir, const std::vector<FrameObservation>& frames,
                  const AvatarBundle* initial = nullptr);

}  // namespace gom::app
