#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gom/camera.hpp"
#include "gom/gauss_xform.hpp"
#include "gom/model.hpp"

namespace gom::app {

/// `count` flat surface Gaussians scattered over a human-sized capsule
/// (1.7 m tall, 0.15 m radius), each covering its share of the surface, plus a
/// camera that frames the capsule at size x size.
struct SplatScene {
  std::vector<WorldGaussian> gaussians;
  Camera camera;
};

SplatScene make_splat_scene(std::size_t count, int size, std::uint64_t seed = 1);

/// A chain rig with `joints` joints and `vertices` random vertices skinned to
/// every joint with random normalized weights.
Avatar make_skinning_scene(std::size_t vertices, std::size_t joints, std::uint64_t seed = 1);

struct TimingStats {
  int warmup = 0;
  int frames = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
};

TimingStats summarize(std::vector<double> samples_ms, int warmup);

/// Projection plus tiled rasterization of the scene.
TimingStats bench_render(const SplatScene& scene, int warmup, int frames);

/// Forward kinematics plus skinning of every vertex, networks absent.
TimingStats bench_articulation(const Avatar& avatar, int warmup, int frames, std::uint64_t seed = 2);

}  // namespace gom::app
