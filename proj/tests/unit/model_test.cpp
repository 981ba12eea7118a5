#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "gom/error.hpp"
#include "gom/model.hpp"
#include "gom/test_rig.hpp"
#include "scenes.hpp"

namespace gom {
namespace {

using std::numbers::pi;
using testing::single_triangle;
using testing::tetrahedron;

Rig chain_rig() {
  Rig rig;
  rig.parents = {-1, 0, 1};
  rig.rest_rotations.assign(3, Mat3::Identity());
  rig.rest_translations = {Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(0, 2, 0)};
  rig.names = {"root", "mid", "tip"};
  return rig;
}

TEST(ForwardKinematics, IdentityPoseGivesIdentityTransforms) {
  const Rig rig = chain_rig();
  const auto t = forward_kinematics(rig, Pose::identity(3));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_TRUE(t.rotations[j].isApprox(Mat3::Identity(), 1e-15));
    EXPECT_LT(t.translations[j].norm(), 1e-15);
  }
}

TEST(ForwardKinematics, HandComposedChain) {
  const Rig rig = chain_rig();
  Pose pose = Pose::identity(3);
  pose.local_rotations[0] = Vec3(0, 0, pi / 2);  // root turns 90 deg about z
  pose.local_rotations[1] = Vec3(0, 0, pi / 2);  // mid turns another 90 deg
  pose.root_translation = Vec3(5, 0, 0);
  const auto t = forward_kinematics(rig, pose);
  auto apply = [&](std::size_t j, const Vec3& p) { return Vec3(t.rotations[j] * p + t.translations[j]); };
  // The tip joint (rest (0,2,0)): root rotation maps mid joint (0,1,0) to (-1,0,0);
  // mid rotation bends the segment mid->tip by a further 90 deg: (0,1,0) -> (-1,0,0) -> (0,-1,0).
  EXPECT_TRUE(apply(1, Vec3(0, 1, 0)).isApprox(Vec3(4, 0, 0), 1e-12));
  EXPECT_TRUE(apply(2, Vec3(0, 2, 0)).isApprox(Vec3(4, -1, 0), 1e-12));
  EXPECT_TRUE(apply(0, Vec3(0, 0, 0)).isApprox(Vec3(5, 0, 0), 1e-12));
}

TEST(ForwardKinematics, RestRotationConjugatesLocalAxes) {
  Rig rig;
  rig.parents = {-1};
  rig.rest_rotations = {so3_exp(Vec3(0, 0, pi / 2))};  // joint x axis = world y
  rig.rest_translations = {Vec3(1, 0, 0)};
  Pose pose = Pose::identity(1);
  pose.local_rotations[0] = Vec3(pi / 2, 0, 0);  // about the joint's x axis = world y
  const auto t = forward_kinematics(rig, pose);
  EXPECT_TRUE(t.rotations[0].isApprox(so3_exp(Vec3(0, pi / 2, 0)), 1e-12));
  // The joint center is a fixed point.
  EXPECT_TRUE((t.rotations[0] * Vec3(1, 0, 0) + t.translations[0]).isApprox(Vec3(1, 0, 0), 1e-12));
}

TEST(ForwardKinematics, VjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Rig rig = chain_rig();
  rig.parents = {-1, 0, 0};
  for (auto& r : rig.rest_rotations) r = testing::random_rotation(rng);
  std::vector<Mat3> local(3);
  for (auto& m : local) m = testing::random_rotation(rng);
  const Vec3 root(0.1, 0.2, 0.3);
  const auto t = forward_kinematics(rig, local, root);
  std::vector<Mat3> gr(3);
  std::vector<Vec3> gt(3);
  for (auto& m : gr) m = Mat3::Random();
  for (auto& v : gt) v = Vec3::Random();
  std::vector<Mat3> g_local(3, Mat3::Zero());
  Vec3 g_root = Vec3::Zero();
  forward_kinematics_vjp(rig, local, t, gr, gt, g_local, &g_root);
  auto loss = [&](const std::vector<Mat3>& l, const Vec3& rt) {
    const auto tt = forward_kinematics(rig, l, rt);
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) s += tt.rotations[j].cwiseProduct(gr[j]).sum() + tt.translations[j].dot(gt[j]);
    return s;
  };
  const double h = 1e-6;
  for (std::size_t j = 0; j < 3; ++j) {
    for (int k = 0; k < 9; ++k) {
      auto lp = local, lm = local;
      lp[j].data()[k] += h;
      lm[j].data()[k] -= h;
      EXPECT_NEAR(g_local[j].data()[k], (loss(lp, root) - loss(lm, root)) / (2 * h), 1e-6);
    }
  }
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    EXPECT_NEAR(g_root[k], (loss(local, root + e) - loss(local, root - e)) / (2 * h), 1e-6);
  }
}

TEST(JointOrder, RejectsCyclesAndBadParents) {
  Rig rig = chain_rig();
  rig.parents = {-1, 2, 1};
  EXPECT_THROW(joint_order(rig), ArgumentError);
  rig.parents = {0, 0, 1};
  EXPECT_THROW(joint_order(rig), ArgumentError);
  rig.parents = {-1, 0, 7};
  EXPECT_THROW(joint_order(rig), ArgumentError);
}

TEST(JointOrder, ParentsPrecedeChildren) {
  Rig rig = chain_rig();
  rig.parents = {-1, 2, 0};
  const auto order = joint_order(rig);
  ASSERT_EQ(order.size(), 3u);
  std::vector<int> rank(3);
  for (int i = 0; i < 3; ++i) rank[order[i]] = i;
  EXPECT_LT(rank[2], rank[1]);
}

std::size_t euler(const Avatar& a) {
  return a.vertices.size() - unique_edges(a.faces).size() + a.faces.size();
}

TEST(Subdivide, CountsOnFixtures) {
  for (const Avatar& a : {single_triangle(), tetrahedron(), make_test_rig(4, 16, 12)}) {
    const Avatar s = subdivide(a);
    EXPECT_EQ(s.faces.size(), 4 * a.faces.size());
    EXPECT_EQ(s.vertices.size(), a.vertices.size() + unique_edges(a.faces).size());
    EXPECT_EQ(s.subdivision_level, a.subdivision_level + 1);
    EXPECT_EQ(euler(s), euler(a));
    EXPECT_TRUE(validate(s).ok()) << validate(s).summary();
  }
}

TEST(Subdivide, TriangleChildren) {
  const Avatar s = subdivide(single_triangle());
  ASSERT_EQ(s.vertices.size(), 6u);
  // Midpoints in order of edge first appearance: (0,1), (1,2), (2,0).
  EXPECT_TRUE(s.vertices[3].position.isApprox(Vec3(0.5, 0, 0)));
  EXPECT_TRUE(s.vertices[4].position.isApprox(Vec3(0.5, 0.5, 0)));
  EXPECT_TRUE(s.vertices[5].position.isApprox(Vec3(0, 0.5, 0)));
  double area = 0.0;
  for (const Face& f : s.faces) {
    EXPECT_EQ(f.color_logit, Vec3(0.5, -1.0, 2.0));
    const auto& i = f.vertex_indices;
    const Vec3 n = (s.vertices[i[1]].position - s.vertices[i[0]].position)
                       .cross(s.vertices[i[2]].position - s.vertices[i[0]].position);
    EXPECT_GT(n.z(), 0.0);  // orientation preserved
    area += 0.5 * n.norm();
  }
  EXPECT_NEAR(area, 0.5, 1e-15);
}

TEST(Subdivide, AveragesWeightsAndIsDeterministic) {
  const Avatar a = make_test_rig(3, 6, 8);
  const Avatar s1 = subdivide(a), s2 = subdivide(a);
  EXPECT_EQ(s1, s2);
  for (std::size_t i = a.vertices.size(); i < s1.vertices.size(); ++i) {
    EXPECT_NEAR(s1.vertices[i].weights.sum(), 1.0, 1e-12);
  }
}

TEST(Validate, ReportsViolations) {
  Avatar a = single_triangle();
  EXPECT_TRUE(validate(a).ok());
  a.faces[0].vertex_indices = {0, 0, 1};
  a.vertices[2].weights[0] = 0.0;
  const auto r = validate(a);
  EXPECT_FALSE(r.ok());
  EXPECT_NE(r.summary().find("face 0"), std::string::npos);
  EXPECT_NE(r.summary().find("vertex 2"), std::string::npos);

  Avatar b = single_triangle();
  b.faces[0].vertex_indices = {0, 1, 9};
  EXPECT_FALSE(validate(b).ok());
  Avatar c = single_triangle();
  c.vertices[0].position.x() = std::nan("");
  EXPECT_FALSE(validate(c).ok());
}

TEST(MeshHelpers, AdjacencyOfTetrahedron) {
  const Avatar t = tetrahedron();
  EXPECT_EQ(unique_edges(t.faces).size(), 6u);
  EXPECT_EQ(face_adjacency(t.faces).size(), 6u);
  const auto rings = vertex_neighbors(4, t.faces);
  for (const auto& r : rings) EXPECT_EQ(r.size(), 3u);
}

}  // namespace
}  // namespace gom
