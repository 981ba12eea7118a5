#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gom/camera.hpp"
#include "gom/image.hpp"
#include "gom/mlp.hpp"
#include "gom/model.hpp"

namespace gom {

/// Camera-space unit normals of the front-most face per pixel, oriented toward
/// the viewer. Uncovered pixels hold (0,0,0) and face id -1.
struct NormalMap {
  int width = 0;
  int height = 0;
  std::vector<Vec3> normals;
  std::vector<std::int32_t> face_ids;

  bool covered(int x, int y) const { return face_ids[static_cast<std::size_t>(y) * width + x] >= 0; }
  const Vec3& normal(int x, int y) const { return normals[static_cast<std::size_t>(y) * width + x]; }
};

/// Hard z-buffer rasterization with flat face normals.
NormalMap raster_normals(std::span<const Vec3> positions, std::span<const Face> faces,
                         const Camera& cam);

/// Gradient w.r.t. vertex positions given per-pixel gradients w.r.t. the normals
/// (face assignment held fixed).
std::vector<Vec3> raster_normals_vjp(std::span<const Vec3> positions, std::span<const Face> faces,
                                     const Camera& cam, const NormalMap& map,
                                     std::span<const Vec3> grad_normals);

/// Default softness: 1e-4 of the image width, in pixels.
double default_silhouette_sigma(const Camera& cam);

/// Differentiable silhouette: M = 1 - prod_j (1 - sigmoid(d_j / sigma)), with
/// d_j the signed pixel distance to face j's projected boundary (positive inside).
Image soft_silhouette(std::span<const Vec3> positions, std::span<const Face> faces,
                      const Camera& cam, double sigma);

std::vector<Vec3> soft_silhouette_vjp(std::span<const Vec3> positions, std::span<const Face> faces,
                                      const Camera& cam, double sigma, const Image& grad_mask);

struct ShadingTape {
  std::vector<std::uint32_t> pixels;  // covered pixel indices, row-major
  Eigen::MatrixXd input;
  MlpTape mlp;
  Image shading;
};

/// S = exp(MLP(encode(n))) on covered pixels, 1 elsewhere. Single channel.
Image shading_map(const NormalMap& normals, const Mlp& params, const EncodingConfig& cfg,
                  ShadingTape* tape = nullptr);

/// Accumulates network gradients and returns per-pixel gradients w.r.t. the normals.
std::vector<Vec3> shading_map_vjp(const NormalMap& normals, const Mlp& params,
                                  const EncodingConfig& cfg, const ShadingTape& tape,
                                  const Image& grad_shading, Mlp& grad_params);

/// I = I_GS * S, broadcasting S over channels. No clamping.
Image compose_final(const Image& albedo, const Image& shading);

}  // namespace gom
