#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gom/articulator.hpp"
#include "gom/error.hpp"
#include "gom/gauss_xform.hpp"
#include "gom/test_rig.hpp"
#include "scenes.hpp"

namespace gom {
namespace {

using std::numbers::pi;

Pose random_pose(std::mt19937_64& rng, std::size_t joints, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Pose p = Pose::identity(joints);
  for (auto& r : p.local_rotations) r = Vec3(u(rng), u(rng), u(rng));
  p.root_translation = Vec3(u(rng), u(rng), u(rng));
  return p;
}

TEST(Articulate, IdentityPoseIsIdentity) {
  const Avatar a = make_test_rig(4, 8, 6);
  const Networks nets = make_networks(4, 1);
  const auto observed = articulate(a, Pose::identity(4), nets, true);
  const auto canonical = a.positions();
  for (std::size_t i = 0; i < observed.size(); ++i) {
    EXPECT_LT((observed[i] - canonical[i]).norm(), 1e-12);
  }
}

TEST(Articulate, ZeroRefinerMatchesRefineOffBitForBit) {
  const Avatar a = make_test_rig(4, 8, 6);
  const Networks nets = make_networks(4, 1);
  std::mt19937_64 rng(3);
  const Pose p = random_pose(rng, 4, 0.8);
  EXPECT_EQ(articulate(a, p, nets, true), articulate(a, p, nets, false));
}

TEST(Lbs, WeightRescaleInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  const Avatar a = make_test_rig(3, 6, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose p = random_pose(rng, 3, 1.0);
    const auto joints = forward_kinematics(a.rig, p);
    const Vec3 x(u(rng), u(rng), u(rng));
    const Eigen::VectorXd w = Eigen::Vector3d(u(rng), u(rng), u(rng));
    EXPECT_LT((lbs(x, w, joints) - lbs(x, 7.3 * w, joints)).norm(), 1e-12);
  }
}

TEST(Lbs, ZeroWeightSumIsDomainError) {
  const Avatar a = make_test_rig(3, 6, 5);
  const auto joints = forward_kinematics(a.rig, Pose::identity(3));
  EXPECT_THROW(lbs(Vec3::Zero(), Eigen::VectorXd::Zero(3), joints), DomainError);
  EXPECT_THROW(lbs(Vec3::Zero(), Eigen::VectorXd::Ones(2), joints), ArgumentError);
}

TEST(Lbs, SingleJointIsRigid) {
  const Avatar a = make_test_rig(3, 6, 5);
  std::mt19937_64 rng(8);
  const Pose p = random_pose(rng, 3, 1.0);
  const auto joints = forward_kinematics(a.rig, p);
  const Vec3 x(0.3, 0.1, -0.2);
  const Eigen::VectorXd w = Eigen::Vector3d(0, 1, 0);
  EXPECT_LT((lbs(x, w, joints) - (joints.rotations[1] * x + joints.translations[1])).norm(), 1e-14);
}

TEST(Articulate, RigidEquivarianceUnderRootMotion) {
  // A global rotation applied at the root joint (rest translation zero)
  // moves every observed vertex rigidly.
  Avatar a = make_test_rig(3, 6, 6);
  for (auto& t : a.rig.rest_translations) t -= a.rig.rest_translations[0];
  std::mt19937_64 rng(9);
  const Networks nets = make_networks(3, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose p = random_pose(rng, 3, 0.7);
    const Mat3 g = testing::random_rotation(rng);
    Pose q = p;
    q.local_rotations[0] = so3_log(g * so3_exp(p.local_rotations[0]));
    q.root_translation = g * p.root_translation;
    const auto x = articulate(a, p, nets, false);
    const auto y = articulate(a, q, nets, false);
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_LT((g * x[i] - y[i]).norm(), 1e-9);
  }
}

TEST(FaceGaussian, RigidEquivariance) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> p{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
    Face f;
    f.vertex_indices = {0, 1, 2};
    f.local_rotation = Vec3(u(rng), u(rng), u(rng));
    f.local_log_scale = Vec3(u(rng), u(rng), u(rng)) * 0.5;
    const Mat3 r = testing::random_rotation(rng);
    const Vec3 t(u(rng), u(rng), u(rng));
    std::vector<Vec3> q;
    for (const Vec3& x : p) q.push_back(r * x + t);
    const WorldGaussian a = face_gaussian(f, p, 1e-3);
    const WorldGaussian b = face_gaussian(f, q, 1e-3);
    EXPECT_LT((r * a.mean + t - b.mean).norm(), 1e-12);
    EXPECT_LT((r * a.covariance * r.transpose() - b.covariance).norm(), 1e-12);
  }
}

TEST(Articulate, ShapeErrors) {
  const Avatar a = make_test_rig(3, 6, 5);
  const Networks nets = make_networks(3, 1);
  EXPECT_THROW(articulate(a, Pose::identity(2), nets, false), ArgumentError);
  Networks wrong = make_networks(4, 1);
  std::mt19937_64 rng(1);
  EXPECT_THROW(articulate(a, random_pose(rng, 3, 0.5), wrong, true), ArgumentError);
  Pose nan_pose = Pose::identity(3);
  nan_pose.local_rotations[1].x() = std::nan("");
  EXPECT_THROW(articulate(a, nan_pose, nets, false), ArgumentError);
}

TEST(Articulate, DeformerAddsOffsetsBeforeSkinning) {
  Avatar a = make_test_rig(2, 4, 4);
  Networks nets = make_networks(2, 1);
  // Output bias only: every vertex moves by the same canonical offset.
  nets.deformer.layers.back().bias = Vec3(0.01, 0.02, -0.03);
  const auto observed = articulate(a, Pose::identity(2), nets, false);
  for (std::size_t i = 0; i < observed.size(); ++i) {
    EXPECT_LT((observed[i] - a.vertices[i].position - Vec3(0.01, 0.02, -0.03)).norm(), 1e-12);
  }
  const auto offsets = nr_deform(a.positions(), Pose::identity(2), nets.deformer, nets.deformer_encoding);
  EXPECT_LT((offsets[0] - Vec3(0.01, 0.02, -0.03)).norm(), 1e-15);
}

TEST(RefinePose, ZeroRefinerKeepsPose) {
  const Avatar a = make_test_rig(3, 6, 5);
  const Networks nets = make_networks(3, 1);
  std::mt19937_64 rng(2);
  const Pose p = random_pose(rng, 3, 1.0);
  const Pose r = refine_pose(p, a.rig, nets.refiner);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_LT((r.local_rotations[j] - p.local_rotations[j]).norm(), 1e-12);
}

TEST(RefinePose, AppliesCorrectionOnTheRight) {
  const Avatar a = make_test_rig(2, 4, 4);
  Networks nets = make_networks(2, 1);
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(6);
  bias.segment<3>(3) = Vec3(0.0, 0.0, 0.2);
  nets.refiner.layers.back().bias = bias;
  Pose p = Pose::identity(2);
  p.local_rotations[1] = Vec3(0.3, 0.0, 0.0);
  const Pose r = refine_pose(p, a.rig, nets.refiner);
  EXPECT_TRUE(so3_exp(r.local_rotations[1]).isApprox(so3_exp(p.local_rotations[1]) * so3_exp(Vec3(0, 0, 0.2)), 1e-12));
}

TEST(Networks, DefaultArchitectures) {
  const Networks n = make_networks(24, 0);
  EXPECT_EQ(n.deformer.input_dim(), 39 + 3 * 23);
  EXPECT_EQ(n.deformer.layers.size(), 7u);
  EXPECT_EQ(n.deformer.width(), 128);
  EXPECT_EQ(n.refiner.input_dim(), 9 * 24);
  EXPECT_EQ(n.refiner.output_dim(), 3 * 24);
  EXPECT_EQ(n.refiner.layers.size(), 5u);
  EXPECT_EQ(n.refiner.width(), 256);
  EXPECT_EQ(n.shading.input_dim(), 27);
  EXPECT_EQ(n.shading.layers.size(), 4u);
  EXPECT_EQ(n.shading.output_dim(), 1);
}

TEST(Articulate, TubemanBendStaysValid) {
  const Avatar a = make_test_rig(4, 16, 12);
  Pose p = Pose::identity(4);
  p.local_rotations[2] = Vec3(0.0, 0.0, pi / 2);
  const auto x = articulate(a, p, make_networks(4, 0), false);
  for (const Vec3& v : x) EXPECT_TRUE(v.allFinite());
  for (const Face& f : a.faces) {
    const auto& i = f.vertex_indices;
    EXPECT_GE(triangle_area(x[i[0]], x[i[1]], x[i[2]]), kDegenerateArea);
  }
}

}  // namespace
}  // namespace gom
