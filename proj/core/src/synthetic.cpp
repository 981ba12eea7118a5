#include "gom/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gom/error.hpp"
#include "gom/test_rig.hpp"

namespace gom {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

FrameObservation observe(const Avatar& avatar, const Networks& nets, const Pose& pose,
                         const Camera& camera, const Vec3& background) {
  RenderOptions ro;
  ro.background = background;
  const RenderOutput out = render(avatar, nets, pose, camera, ro);
  return {out.composite, out.mask, pose, camera};
}

SyntheticScene make_synthetic_scene(const SyntheticOptions& o) {
  if (o.frames == 0) throw ArgumentError("make_synthetic_scene: need at least one frame");
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticScene s;
  s.truth = make_test_rig(o.joints, o.segments, o.radial);
  const double height = 0.25 * static_cast<double>(o.joints);

  // Low-frequency radial bulges, zero at the caps' axis.
  const double phase_a = 2 * std::numbers::pi * unit(rng), phase_b = 2 * std::numbers::pi * unit(rng);
  for (Vertex& v : s.truth.vertices) {
    Vec3 radial(v.position.x(), 0.0, v.position.z());
    const double r = radial.norm();
    if (r < 1e-9) continue;
    const double t = v.position.y() / height;
    const double theta = std::atan2(v.position.z(), v.position.x());
    const double bump = std::sin(2 * std::numbers::pi * t + phase_a) * 0.6 +
                        std::cos(2 * theta + phase_b) * 0.4;
    v.position += o.offset_amplitude * bump * radial / r;
  }

  // Smooth color field over face centroids.
  Vec3 freq, phase;
  for (int c = 0; c < 3; ++c) {
    freq[c] = 2.0 + 4.0 * unit(rng);
    phase[c] = 2 * std::numbers::pi * unit(rng);
  }
  const auto pos = s.truth.positions();
  for (Face& f : s.truth.faces) {
    const Vec3 centroid = (pos[f.vertex_indices[0]] + pos[f.vertex_indices[1]] +
                           pos[f.vertex_indices[2]]) / 3.0;
    const double theta = std::atan2(centroid.z(), centroid.x());
    for (int c = 0; c < 3; ++c) {
      const double wave = std::sin(freq[c] * centroid.y() + (c + 1) * theta + phase[c]);
      f.color_logit[c] = logit(0.5 + 0.35 * wave);
    }
  }

  s.truth_nets = make_networks(o.joints, o.seed + 1);

  const Vec3 target(0.0, 0.5 * height, 0.0);
  const double step = 2 * std::numbers::pi / static_cast<double>(o.frames);
  const double start = step * unit(rng);
  std::vector<Pose> poses;
  for (std::size_t i = 0; i < o.frames; ++i) {
    Pose pose = Pose::identity(o.joints);
    for (std::size_t j = 1; j < o.joints; ++j) {
      pose.local_rotations[j] = o.bend_sigma * Vec3(normal(rng), normal(rng), normal(rng));
    }
    const double elevation = o.elevation_range * (2.0 * unit(rng) - 1.0);
    const Camera cam = orbit_camera(target, o.camera_distance, start + step * i, elevation,
                                    o.width, o.height);
    s.train.push_back(observe(s.truth, s.truth_nets, pose, cam, o.background));
    poses.push_back(pose);
  }
  const Camera novel = orbit_camera(target, o.camera_distance, start + 0.5 * step, 0.0, o.width,
                                    o.height);
  s.held_out = observe(s.truth, s.truth_nets, poses.front(), novel, o.background);
  return s;
}

Avatar perturbed_initialization(const Avatar& truth, double jitter_sigma, std::uint64_t seed) {
  if (!(jitter_sigma >= 0.0)) throw ArgumentError("perturbed_initialization: sigma must be >= 0");
  Avatar a = truth;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, jitter_sigma > 0.0 ? jitter_sigma : 1.0);
  for (Vertex& v : a.vertices) {
    if (jitter_sigma > 0.0) v.position += Vec3(normal(rng), normal(rng), normal(rng));
  }
  for (Face& f : a.faces) f.color_logit = Vec3::Zero();
  return a;
}

}  // namespace gom
