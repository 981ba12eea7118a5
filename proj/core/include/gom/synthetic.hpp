#pragma once

#include <cstdint>
#include <vector>

#include "gom/articulator.hpp"
#include "gom/fit.hpp"

namespace gom {

/// A ground-truth tubeman with smooth random colors and static bulges,
/// rendered under random bends from random orbit cameras.
struct SyntheticOptions {
  std::size_t joints = 4;
  std::size_t segments = 16;
  std::size_t radial = 12;
  std::size_t frames = 20;
  int width = 128;
  int height = 128;
  std::uint64_t seed = 1;
  double bend_sigma = 0.35;        // rad, per axis-angle component of non-root joints
  double offset_amplitude = 0.01;  // m, peak radial bulge
  double camera_distance = 2.2;
  double elevation_range = 0.35;   // rad, uniform in +-range
  Vec3 background = Vec3::Zero();
};

struct SyntheticScene {
  Avatar truth;
  Networks truth_nets;  // zero output layers: no learned correction
  std::vector<FrameObservation> train;
  /// A training pose seen from an azimuth halfway between two training views.
  FrameObservation held_out;
};

SyntheticScene make_synthetic_scene(const SyntheticOptions& options = {});

/// Renders the ground truth for a pose and camera (refinement off).
FrameObservation observe(const Avatar& avatar, const Networks& nets, const Pose& pose,
                         const Camera& camera, const Vec3& background = Vec3::Zero());

/// Truth with colors reset to mid-gray and vertices jittered by N(0, sigma^2) per axis.
Avatar perturbed_initialization(const Avatar& truth, double jitter_sigma, std::uint64_t seed);

}  // namespace gom
