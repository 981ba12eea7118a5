#include <gtest/gtest.h>

#include "gom/error.hpp"
#include "gom/parallel.hpp"
#include "gom/render.hpp"
#include "gom/test_rig.hpp"
#include "scenes.hpp"

namespace gom {
namespace {

struct Fixture {
  Avatar avatar = make_test_rig(3, 8, 12);
  Networks nets = make_networks(3, 11);
  Camera cam = orbit_camera(Vec3(0, 0.375, 0), 2.0, 0.3, 0.1, 48, 48);
};

TEST(Render, ModeNamesRoundTrip) {
  for (RenderMode m : {RenderMode::final_image, RenderMode::albedo, RenderMode::shading,
                       RenderMode::normal, RenderMode::mask}) {
    EXPECT_EQ(parse_render_mode(to_string(m)), m);
  }
  EXPECT_FALSE(parse_render_mode("depth"));
}

TEST(Render, BackgroundShowsOnlyWhereUncovered) {
  Fixture f;
  RenderOptions o;
  o.background = Vec3(0.2, 0.4, 0.6);
  const RenderOutput out = render(f.avatar, f.nets, Pose::identity(3), f.cam, o);
  EXPECT_EQ(out.gaussian_count, f.avatar.faces.size());
  // Corner pixel is background, center pixel is the body.
  EXPECT_NEAR(out.composite.at(0, 0, 2), 0.6, 1e-9);
  EXPECT_GT(out.mask.at(24, 24), 0.99);
  for (std::size_t p = 0; p < out.mask.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(out.composite.data[3 * p + c],
                  out.image.data[3 * p + c] + (1 - out.mask.data[p]) * o.background[c], 1e-15);
    }
  }
}

TEST(Render, ZeroNetworksImageEqualsAlbedo) {
  Fixture f;
  const RenderOutput out = render(f.avatar, f.nets, Pose::identity(3), f.cam);
  EXPECT_EQ(out.image, out.albedo);
  EXPECT_TRUE(out.mesh_mask.data.empty());
}

TEST(Render, MeshMaskOnRequest) {
  Fixture f;
  RenderOptions o;
  o.mesh_mask = true;
  const RenderOutput out = render(f.avatar, f.nets, Pose::identity(3), f.cam, o);
  ASSERT_EQ(out.mesh_mask.width, 48);
  EXPECT_GT(out.mesh_mask.at(24, 24), 0.99);
  EXPECT_LT(out.mesh_mask.at(0, 0), 0.01);
}

TEST(Render, DeterministicAcrossThreadCounts) {
  Fixture f;
  Pose pose = Pose::identity(3);
  pose.local_rotations[1] = Vec3(0.4, 0, 0.2);
  f.nets.shading.layers.back().weight.setConstant(0.01);
  const std::size_t saved = thread_count();
  set_thread_count(1);
  const RenderOutput a = render(f.avatar, f.nets, pose, f.cam);
  set_thread_count(4);
  const RenderOutput b = render(f.avatar, f.nets, pose, f.cam);
  set_thread_count(saved);
  EXPECT_EQ(a.composite, b.composite);
  EXPECT_EQ(to_rgba8(a, RenderMode::final_image), to_rgba8(b, RenderMode::final_image));
}

TEST(Render, Rgba8Modes) {
  Fixture f;
  f.nets.shading.layers.back().bias.setConstant(0.5);
  const RenderOutput out = render(f.avatar, f.nets, Pose::identity(3), f.cam);
  const std::size_t n = out.mask.pixel_count();
  for (RenderMode m : {RenderMode::final_image, RenderMode::albedo, RenderMode::shading,
                       RenderMode::normal, RenderMode::mask}) {
    const auto px = to_rgba8(out, m);
    ASSERT_EQ(px.size(), 4 * n);
    for (std::size_t p = 0; p < n; ++p) EXPECT_EQ(px[4 * p + 3], 255);
  }
  // Uniform shading normalized by its maximum is white on the body.
  const auto sh = to_rgba8(out, RenderMode::shading);
  const std::size_t center = 24 * 48 + 24;
  EXPECT_EQ(sh[4 * center], 255);
  EXPECT_EQ(sh[0], 0);
  // Final image at exp(0.5) * 0.5 gray clamps below 1.
  const auto fin = to_rgba8(out, RenderMode::final_image);
  EXPECT_NEAR(fin[4 * center], std::lround(255 * std::min(1.0, out.composite.data[3 * center])), 0);
  const auto nrm = to_rgba8(out, RenderMode::normal);
  EXPECT_EQ(nrm[0], 0);
  EXPECT_LT(nrm[4 * center + 2], 128);  // facing the camera: n.z < 0
}

TEST(Render, ObservedPipelineMatches) {
  Fixture f;
  Pose pose = Pose::identity(3);
  pose.local_rotations[2] = Vec3(0, 0, 0.7);
  const RenderOutput a = render(f.avatar, f.nets, pose, f.cam);
  const RenderOutput b = render_observed(f.avatar, f.nets, a.observed_positions, f.cam);
  EXPECT_EQ(a.composite, b.composite);
}

TEST(Render, RejectsBadInputs) {
  Fixture f;
  EXPECT_THROW(render(f.avatar, f.nets, Pose::identity(2), f.cam), ArgumentError);
  Camera bad = f.cam;
  bad.fx = 0;
  EXPECT_THROW(render(f.avatar, f.nets, Pose::identity(3), bad), ArgumentError);
}

}  // namespace
}  // namespace gom
