#pragma once

#include <span>
#include <string>
#include <vector>

#include "gom/image.hpp"
#include "gom/model.hpp"

namespace gom {

inline constexpr double kPsnrCap = 99.0;

struct ImageMetrics {
  double psnr = 0.0;  // dB, capped at kPsnrCap when MSE < 1e-10
  double ssim = 0.0;  // 11x11 Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03, channel mean
};

ImageMetrics image_metrics(const Image& pred, const Image& gt);
double psnr(const Image& pred, const Image& gt);
double ssim(const Image& pred, const Image& gt);

/// Intersection over union of masks binarized at 0.5. Two empty masks give 1.
double mask_iou(const Image& pred, const Image& gt);

struct GeometryMetrics {
  double chamfer = 0.0;             // m^2: symmetric mean squared nearest-vertex distance
  double normal_consistency = 0.0;  // mean of 1 - |n_gt - n_pred| over gt vertices
};

/// Vertex-set metrics. Nearest neighbors break ties by lowest index.
GeometryMetrics geometry_metrics(std::span<const Vec3> pred_positions,
                                 std::span<const Face> pred_faces,
                                 std::span<const Vec3> gt_positions,
                                 std::span<const Face> gt_faces);

/// Unit vertex normals from area-weighted incident face normals.
std::vector<Vec3> vertex_normals(std::span<const Vec3> positions, std::span<const Face> faces);

/// Index of the nearest point in `cloud` for every query point.
std::vector<std::size_t> nearest_neighbors(std::span<const Vec3> cloud,
                                           std::span<const Vec3> queries);

struct MetricReport {
  std::vector<std::pair<std::string, double>> entries;
  /// `key=value` lines.
  std::string to_text() const;
};

}  // namespace gom
