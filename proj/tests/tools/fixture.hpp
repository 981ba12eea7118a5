#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gom/io.hpp"
#include "gom/test_rig.hpp"

namespace gom::testing {

// Tubeman with random albedo and a shading network whose output is not
// constant, so that every render mode produces a different picture.
inline AvatarBundle tool_fixture(std::uint64_t seed = 3) {
  AvatarBundle b;
  b.avatar = make_test_rig(4, 16, 12);
  b.nets = make_networks(4, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Face& f : b.avatar.faces) f.color_logit = Vec3(n(rng), n(rng), n(rng));
  auto& out = b.nets.shading.layers.back();
  for (Eigen::Index i = 0; i < out.weight.size(); ++i) out.weight.data()[i] = 0.05 * n(rng);
  return quantize_to_file_precision(b);
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("gom_test_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> to_rgba8_bytes(const Image& rgba) {
  std::vector<std::uint8_t> out(rgba.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(rgba.data[i] * 255.0));
  }
  return out;
}

}  // namespace gom::testing
