#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gom/articulator.hpp"
#include "gom/camera.hpp"
#include "gom/gauss_xform.hpp"
#include "gom/image.hpp"
#include "gom/shading.hpp"
#include "gom/splatter.hpp"

namespace gom {

enum class RenderMode { final_image, albedo, shading, normal, mask };

std::optional<RenderMode> parse_render_mode(std::string_view name);
std::string_view to_string(RenderMode mode);

struct RenderOptions {
  bool refine = false;  // pose refinement: on for training and novel views, off for animation
  RasterSettings raster{};
  Vec3 background = Vec3::Zero();
  bool mesh_mask = false;           // also compute the soft silhouette
  double silhouette_sigma = 0.0;    // <= 0 selects default_silhouette_sigma
};

/// Everything one frame of the rendering pipeline produces.
struct RenderOutput {
  std::vector<Vec3> observed_positions;
  Image albedo;     // I_GS
  Image mask;       // M
  NormalMap normals;
  Image shading;    // S
  Image image;      // I = I_GS * S
  Image composite;  // I + (1 - M) * background
  Image mesh_mask;  // M_mesh, empty unless requested
  std::size_t gaussian_count = 0;
};

/// World Gaussians of all non-degenerate faces; `face_of` receives the source face index.
std::vector<WorldGaussian> world_gaussians(std::span<const Face> faces,
                                           std::span<const Vec3> positions, double epsilon,
                                           std::vector<std::uint32_t>* face_of = nullptr);

/// Projects Gaussians, dropping culled ones; `source` receives the Gaussian index.
std::vector<Splat2D> project_all(std::span<const WorldGaussian> gaussians, const Camera& cam,
                                 std::vector<std::uint32_t>* source = nullptr);

/// Final image plus background: I + (1 - M) * background.
Image composite_over(const Image& image, const Image& mask, const Vec3& background);

/// The full inference pipeline: articulate, face Gaussians, splat, normal
/// raster, shading network, composition.
RenderOutput render(const Avatar& avatar, const Networks& nets, const Pose& pose,
                    const Camera& cam, const RenderOptions& options = {});

/// Same pipeline from already-articulated vertex positions.
RenderOutput render_observed(const Avatar& avatar, const Networks& nets,
                             std::vector<Vec3> observed, const Camera& cam,
                             const RenderOptions& options = {});

/// 8-bit RGBA visualization of one render mode. Values are clamped to [0, 1]
/// and rounded. Shading is shown as gray normalized by its maximum; normals
/// as 0.5 * n + 0.5 on covered pixels.
std::vector<std::uint8_t> to_rgba8(const RenderOutput& out, RenderMode mode,
                                   const Vec3& background = Vec3::Zero());

}  // namespace gom
