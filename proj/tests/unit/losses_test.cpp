#include <gtest/gtest.h>

#include <cmath>

#include "gom/error.hpp"
#include "gom/fit.hpp"
#include "gom/test_rig.hpp"

namespace gom {
namespace {

// n x n vertex grid in the z = 0 plane with parallel diagonals, so every
// interior vertex has a point-symmetric one-ring.
Avatar planar_grid(int n, double spacing) {
  Avatar a;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      Vertex v;
      v.position = Vec3(x * spacing, y * spacing, 0.0);
      v.weights = Eigen::VectorXd::Ones(1);
      a.vertices.push_back(v);
    }
  }
  auto id = [n](int x, int y) { return static_cast<std::uint32_t>(y * n + x); };
  for (int y = 0; y + 1 < n; ++y) {
    for (int x = 0; x + 1 < n; ++x) {
      Face f, g;
      f.vertex_indices = {id(x, y), id(x + 1, y), id(x + 1, y + 1)};
      g.vertex_indices = {id(x, y), id(x + 1, y + 1), id(x, y + 1)};
      a.faces.push_back(f);
      a.faces.push_back(g);
    }
  }
  a.rig.parents = {-1};
  a.rig.rest_rotations = {Mat3::Identity()};
  a.rig.rest_translations = {Vec3::Zero()};
  a.rig.names = {"root"};
  return a;
}

RenderOutput fake_render(int w, int h, double value, double mask) {
  RenderOutput r;
  r.composite = Image(w, h, 3, value);
  r.mask = Image(w, h, 1, mask);
  r.mesh_mask = Image(w, h, 1, mask);
  return r;
}

TEST(Losses, DefaultWeights) {
  const LossWeights w;
  EXPECT_EQ(w.lpips, 1.0);
  EXPECT_EQ(w.mask, 5.0);
  EXPECT_EQ(w.reg, 1.0);
  EXPECT_EQ(w.laplacian, 10.0);
  EXPECT_EQ(w.normal, 0.1);
  EXPECT_EQ(w.color, 0.05);
}

TEST(Losses, PerfectFlatUniformMeshIsZero) {
  const Avatar a = planar_grid(4, 0.1);
  const RenderOutput r = fake_render(8, 8, 0.3, 1.0);
  const FrameObservation obs{r.composite, r.mask, Pose::identity(1), {}};
  const LossBreakdown l = loss_terms(r, obs, a, LossWeights{});
  EXPECT_EQ(l.image, 0.0);
  EXPECT_EQ(l.mask, 0.0);
  EXPECT_EQ(l.mesh_mask, 0.0);
  EXPECT_EQ(l.perceptual, 0.0);
  EXPECT_NEAR(l.laplacian, 0.0, 1e-30);
  EXPECT_NEAR(l.normal, 0.0, 1e-15);
  EXPECT_EQ(l.color, 0.0);
  EXPECT_NEAR(l.total, 0.0, 1e-14);
}

TEST(Losses, InteriorLaplacianOfPlanarGridVanishes) {
  Avatar a = planar_grid(5, 0.1);
  EXPECT_NEAR(laplacian_loss(a.positions(), a.faces), 0.0, 1e-30);
  // Lifting the center vertex by h: its own coordinate is h and each of its
  // six interior neighbors sees -h/6, over 9 interior vertices.
  const double h = 0.02;
  a.vertices[12].position.z() = h;
  const double expected = (h * h + 6 * (h / 6) * (h / 6)) / 9.0;
  EXPECT_NEAR(laplacian_loss(a.positions(), a.faces), expected, 1e-15);
}

TEST(Losses, RegularizersNonnegativeOnTubeman) {
  Avatar a = make_test_rig(4, 16, 12);
  const auto p = a.positions();
  EXPECT_GT(laplacian_loss(p, a.faces), 0.0);
  EXPECT_GT(normal_consistency_loss(p, a.faces), 0.0);
  EXPECT_EQ(color_smoothness_loss(a.faces), 0.0);
  a.faces[0].color_logit = Vec3(1, 0, 0);
  EXPECT_GT(color_smoothness_loss(a.faces), 0.0);
}

TEST(Losses, NormalConsistencyOfFoldedPair) {
  // Two triangles sharing edge (0,1) folded by 90 degrees: 1 - cos = 1.
  const std::vector<Vec3> p{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  Face a, b;
  a.vertex_indices = {0, 1, 2};
  b.vertex_indices = {1, 0, 3};
  const std::vector<Face> faces{a, b};
  EXPECT_NEAR(normal_consistency_loss(p, faces), 1.0, 1e-15);
}

TEST(Losses, ColorSmoothnessIsMeanAbsoluteAlbedoGap) {
  Avatar a = planar_grid(2, 1.0);
  a.faces[0].color_logit = Vec3(std::log(3.0), 0, 0);  // sigmoid = 0.75
  EXPECT_NEAR(color_smoothness_loss(a.faces), 0.25 / 3.0, 1e-15);
}

TEST(Losses, TotalFollowsWeights) {
  Avatar a = planar_grid(4, 0.1);
  a.vertices[5].position.z() = 0.03;
  a.faces[3].color_logit = Vec3(0.5, -0.2, 0.1);
  RenderOutput r = fake_render(4, 4, 0.5, 0.8);
  FrameObservation obs{Image(4, 4, 3, 0.4), Image(4, 4, 1, 1.0), Pose::identity(1), {}};
  r.mesh_mask = Image(4, 4, 1, 0.7);

  class Constant : public PerceptualLoss {
   public:
    double evaluate(const Image&, const Image&, Image*) const override { return 0.125; }
  } perceptual;

  const LossWeights w;
  const LossBreakdown l = loss_terms(r, obs, a, w, &perceptual);
  EXPECT_NEAR(l.image, 0.1, 1e-15);
  EXPECT_NEAR(l.mask, 0.2, 1e-15);
  EXPECT_NEAR(l.mesh_mask, 0.3, 1e-15);
  EXPECT_EQ(l.perceptual, 0.125);
  const double expected = l.image + 1.0 * l.perceptual + 5.0 * l.mask +
                          1.0 * (l.mesh_mask + 10 * l.laplacian + 0.1 * l.normal + 0.05 * l.color);
  EXPECT_NEAR(l.total, expected, 1e-15);
  EXPECT_NEAR(l.reg, l.mesh_mask + 10 * l.laplacian + 0.1 * l.normal + 0.05 * l.color, 1e-15);
}

TEST(Losses, Errors) {
  const Avatar a = planar_grid(3, 0.1);
  const RenderOutput r = fake_render(4, 4, 0.5, 1.0);
  FrameObservation obs{Image(5, 4, 3), Image(4, 4, 1), Pose::identity(1), {}};
  EXPECT_THROW(loss_terms(r, obs, a, LossWeights{}), ArgumentError);
  obs.image = Image(4, 4, 3);
  LossWeights neg;
  neg.mask = -1;
  EXPECT_THROW(loss_terms(r, obs, a, neg), ArgumentError);
  RenderOutput no_mesh = r;
  no_mesh.mesh_mask = Image();
  EXPECT_THROW(loss_terms(no_mesh, obs, a, LossWeights{}), ArgumentError);
  LossWeights no_reg;
  no_reg.reg = 0;
  EXPECT_NO_THROW(loss_terms(no_mesh, obs, a, no_reg));
}

}  // namespace
}  // namespace gom
