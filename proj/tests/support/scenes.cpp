#include "scenes.hpp"

#include <cmath>

namespace gom::testing {

namespace {

void perturb_output(Mlp& m, std::mt19937_64& rng, double scale) {
  if (m.empty()) return;
  std::normal_distribution<double> n(0.0, scale);
  DenseLayer& last = m.layers.back();
  for (Eigen::Index i = 0; i < last.weight.size(); ++i) last.weight.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < last.bias.size(); ++i) last.bias[i] = n(rng);
}

}  // namespace

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  axis.normalize();
  std::uniform_real_distribution<double> a(0.0, 3.1);
  return so3_exp(axis * a(rng));
}

Avatar single_triangle() {
  Avatar a;
  a.rig.parents = {-1};
  a.rig.rest_rotations = {Mat3::Identity()};
  a.rig.rest_translations = {Vec3::Zero()};
  a.rig.names = {"root"};
  for (const Vec3& p : {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}) {
    Vertex v;
    v.position = p;
    v.weights = Eigen::VectorXd::Ones(1);
    a.vertices.push_back(v);
  }
  Face f;
  f.vertex_indices = {0, 1, 2};
  f.color_logit = Vec3(0.5, -1.0, 2.0);
  a.faces.push_back(f);
  return a;
}

Avatar tetrahedron() {
  Avatar a = single_triangle();
  Vertex v;
  v.position = Vec3(0, 0, 1);
  v.weights = Eigen::VectorXd::Ones(1);
  a.vertices.push_back(v);
  a.faces.clear();
  for (std::array<std::uint32_t, 3> idx : {std::array<std::uint32_t, 3>{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}}) {
    Face f;
    f.vertex_indices = idx;
    a.faces.push_back(f);
  }
  return a;
}

TinyScene make_tiny_scene(std::uint64_t seed, bool zero_networks) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  TinyScene s;
  Avatar& a = s.avatar;

  const std::size_t joints = 3;
  for (std::size_t j = 0; j < joints; ++j) {
    a.rig.parents.push_back(static_cast<int>(j) - 1);
    a.rig.rest_rotations.push_back(so3_exp(Vec3(0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng))));
    a.rig.rest_translations.push_back(Vec3(0.0, -0.3 + 0.3 * static_cast<double>(j), 0.0));
    a.rig.names.push_back("j" + std::to_string(j));
  }
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      Vertex v;
      v.position = Vec3(-0.5 + 0.5 * x + 0.05 * u(rng), -0.5 + 0.5 * y + 0.05 * u(rng), 0.15 * u(rng));
      v.weights.resize(joints);
      for (std::size_t j = 0; j < joints; ++j) v.weights[static_cast<Eigen::Index>(j)] = 0.2 + std::abs(u(rng));
      a.vertices.push_back(v);
    }
  }
  auto id = [](int x, int y) { return static_cast<std::uint32_t>(3 * y + x); };
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      Face f1, f2;
      f1.vertex_indices = {id(x, y), id(x + 1, y), id(x, y + 1)};
      f2.vertex_indices = {id(x + 1, y), id(x + 1, y + 1), id(x, y + 1)};
      a.faces.push_back(f1);
      a.faces.push_back(f2);
    }
  }
  for (Face& f : a.faces) {
    f.local_rotation = Vec3(0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng));
    f.local_log_scale = Vec3(-0.4 + 0.2 * u(rng), -0.4 + 0.2 * u(rng), 0.2 * u(rng));
    f.color_logit = Vec3(n(rng), n(rng), n(rng));
  }
  a.epsilon = 0.05;

  s.nets = make_networks(joints, seed + 11);
  if (!zero_networks) {
    perturb_output(s.nets.deformer, rng, 0.01);
    perturb_output(s.nets.refiner, rng, 0.02);
    perturb_output(s.nets.shading, rng, 0.05);
  }

  Camera cam;
  cam.width = cam.height = 16;
  cam.fx = cam.fy = 18.0;
  cam.cx = cam.cy = 8.0;
  cam.rotation = so3_exp(Vec3(0.05 * u(rng), 0.05 * u(rng), 0.05 * u(rng)));
  cam.translation = Vec3(0.02 * u(rng), 0.02 * u(rng), 2.2);
  s.obs.camera = cam;
  s.obs.pose = Pose::identity(joints);
  if (!zero_networks) {
    for (auto& r : s.obs.pose.local_rotations) r = Vec3(0.15 * u(rng), 0.15 * u(rng), 0.15 * u(rng));
    s.obs.pose.root_translation = Vec3(0.02 * u(rng), 0.02 * u(rng), 0.02 * u(rng));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  s.obs.image = Image(16, 16, 3);
  s.obs.mask = Image(16, 16, 1);
  for (double& v : s.obs.image.data) v = unit(rng);
  for (double& v : s.obs.mask.data) v = unit(rng);
  return s;
}

std::vector<Splat2D> random_splats(std::mt19937_64& rng, std::size_t count, int width, int height) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Splat2D> out(count);
  for (Splat2D& s : out) {
    s.mean = Vec2(-4.0 + (width + 8.0) * u(rng), -4.0 + (height + 8.0) * u(rng));
    const double sx = 0.5 + 6.0 * u(rng), sy = 0.5 + 6.0 * u(rng), th = 3.14159 * u(rng);
    Mat2 r;
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    s.cov = r * Vec2(sx * sx, sy * sy).asDiagonal() * r.transpose() + kDilation * Mat2::Identity();
    s.depth = 0.5 + 5.0 * u(rng);
    s.color = Vec3(u(rng), u(rng), u(rng));
  }
  return out;
}

}  // namespace gom::testing
