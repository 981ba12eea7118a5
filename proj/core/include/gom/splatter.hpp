#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gom/camera.hpp"
#include "gom/gauss_xform.hpp"
#include "gom/image.hpp"

namespace gom {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kDilation = 0.3;  // px^2 added to the screen-space covariance diagonal
inline constexpr double kMaxAlpha = 0.999;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr int kTileSize = 16;

struct Splat2D {
  Vec2 mean = Vec2::Zero();  // pixels
  Mat2 cov = Mat2::Identity();  // pixels^2, dilation included
  double depth = 0.0;        // camera-space z
  Vec3 color = Vec3::Zero();
};

/// Returns nullopt when the mean is at or behind the near plane.
std::optional<Splat2D> project_gaussian(const WorldGaussian& g, const Camera& cam);

struct SplatGrad {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
  Vec3 color = Vec3::Zero();
};

struct WorldGaussianGrad {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
  Vec3 color = Vec3::Zero();
};

WorldGaussianGrad project_gaussian_vjp(const WorldGaussian& g, const Camera& cam,
                                       const SplatGrad& grad);

struct RasterSettings {
  /// Contributions beyond this Mahalanobis radius are skipped; infinity
  /// evaluates every splat at every pixel. The default drops alphas below 1e-6.
  double cutoff_sigma = std::sqrt(2.0 * std::log(1e6));
  bool early_termination = true;

  static RasterSettings exact() {
    return {std::numeric_limits<double>::infinity(), false};
  }
};

struct RasterOutput {
  Image albedo;  // 3 channels, I_GS
  Image mask;    // 1 channel, M
};

/// Tiled front-to-back compositing of depth-sorted splats (ties by input index).
RasterOutput rasterize(std::span<const Splat2D> splats, int width, int height,
                       const RasterSettings& settings = {});

/// Naive oracle: global sort, every splat at every pixel, no termination, no cutoff.
RasterOutput rasterize_reference(std::span<const Splat2D> splats, int width, int height);

/// Gradients of a scalar loss w.r.t. every splat (input order), given the loss
/// gradient w.r.t. the albedo and mask images produced by rasterize().
std::vector<SplatGrad> rasterize_backward(std::span<const Splat2D> splats, int width, int height,
                                          const RasterSettings& settings,
                                          const Image& grad_albedo, const Image& grad_mask);

}  // namespace gom
