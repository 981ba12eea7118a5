#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "gom/articulator.hpp"
#include "gom/error.hpp"
#include "gom/render.hpp"

namespace gom::app {

namespace {

constexpr double kHeight = 1.7;
constexpr double kRadius = 0.15;

template <typename F>
std::vector<double> time_runs(int runs, F&& body) {
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return ms;
}

}  // namespace

SplatScene make_splat_scene(std::size_t count, int size, std::uint64_t seed) {
  if (count == 0 || size <= 0) throw ArgumentError("splat scene needs gaussians and a positive size");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double area = 2.0 * std::numbers::pi * kRadius * kHeight;
  const double sigma = std::sqrt(area / static_cast<double>(count)) * 0.6;
  SplatScene s;
  s.gaussians.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double th = 2.0 * std::numbers::pi * u(rng), y = kHeight * u(rng);
    const Vec3 n(std::cos(th), 0.0, std::sin(th));
    const Vec3 t(-std::sin(th), 0.0, std::cos(th));
    const Vec3 b(0.0, 1.0, 0.0);
    WorldGaussian g;
    g.mean = Vec3(kRadius * n.x(), y, kRadius * n.z());
    Mat3 axes;
    axes.col(0) = sigma * t;
    axes.col(1) = sigma * b;
    axes.col(2) = kDefaultEpsilon * n;
    g.covariance = axes * axes.transpose();
    g.color = Vec3(u(rng), u(rng), u(rng));
    s.gaussians.push_back(g);
  }
  s.camera = orbit_camera(Vec3(0.0, 0.5 * kHeight, 0.0), 2.6, 0.3, 0.1, size, size, 0.8);
  return s;
}

Avatar make_skinning_scene(std::size_t vertices, std::size_t joints, std::uint64_t seed) {
  if (vertices == 0 || joints == 0) throw ArgumentError("skinning scene needs vertices and joints");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Avatar a;
  for (std::size_t j = 0; j < joints; ++j) {
    a.rig.parents.push_back(static_cast<int>(j) - 1);
    a.rig.rest_rotations.push_back(Mat3::Identity());
    a.rig.rest_translations.push_back(Vec3(0.0, 0.07 * static_cast<double>(j), 0.0));
    a.rig.names.push_back("j" + std::to_string(j));
  }
  a.vertices.resize(vertices);
  for (Vertex& v : a.vertices) {
    v.position = Vec3(u(rng) - 0.5, 1.7 * u(rng), u(rng) - 0.5);
    v.weights.resize(static_cast<Eigen::Index>(joints));
    for (Eigen::Index j = 0; j < v.weights.size(); ++j) v.weights[j] = u(rng);
    v.weights /= v.weights.sum();
  }
  return a;
}

TimingStats summarize(std::vector<double> samples, int warmup) {
  TimingStats t;
  t.warmup = warmup;
  t.frames = static_cast<int>(samples.size());
  if (samples.empty()) return t;
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  t.median_ms = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  t.p95_ms = samples[std::clamp<std::size_t>(rank, 1, n) - 1];
  t.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  return t;
}

TimingStats bench_render(const SplatScene& scene, int warmup, int frames) {
  double sink = 0.0;
  auto once = [&] {
    const std::vector<Splat2D> splats = project_all(scene.gaussians, scene.camera);
    const RasterOutput out = rasterize(splats, scene.camera.width, scene.camera.height);
    sink += out.mask.data[out.mask.data.size() / 2];
  };
  time_runs(warmup, once);
  auto samples = time_runs(frames, once);
  if (!std::isfinite(sink)) throw NumericError("bench", "non-finite render");
  return summarize(std::move(samples), warmup);
}

TimingStats bench_articulation(const Avatar& avatar, int warmup, int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  Pose pose = Pose::identity(avatar.rig.joint_count());
  for (Vec3& r : pose.local_rotations) r = Vec3(n(rng), n(rng), n(rng));
  const Networks none;
  double sink = 0.0;
  auto once = [&] { sink += articulate(avatar, pose, none, false).back().x(); };
  time_runs(warmup, once);
  auto samples = time_runs(frames, once);
  if (!std::isfinite(sink)) throw NumericError("bench", "non-finite articulation");
  return summarize(std::move(samples), warmup);
}

}  // namespace gom::app
