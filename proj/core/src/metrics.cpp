#include "gom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "gom/error.hpp"
#include "gom/parallel.hpp"

namespace gom {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw ArgumentError(std::string(what) + ": image shapes differ");
  if (a.data.empty()) throw ArgumentError(std::string(what) + ": empty image");
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(11);
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "valid" filtering of one channel.
std::vector<double> filter(const std::vector<double>& img, int w, int h,
                           const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  const int ow = w - 2 * r, oh = h - 2 * r;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < static_cast<int>(k.size()); ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < static_cast<int>(k.size()); ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& pred, const Image& gt) {
  require_same(pred, gt, "psnr");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - gt.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(pred.data.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& pred, const Image& gt) {
  require_same(pred, gt, "ssim");
  const int w = pred.width, h = pred.height;
  if (w < 11 || h < 11) throw ArgumentError("ssim: images must be at least 11x11");
  const auto k = gaussian_kernel();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const std::size_t n = pred.pixel_count();
  double total = 0.0;
  for (int c = 0; c < pred.channels; ++c) {
    std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
    for (std::size_t p = 0; p < n; ++p) {
      a[p] = pred.data[p * pred.channels + c];
      b[p] = gt.data[p * gt.channels + c];
      aa[p] = a[p] * a[p];
      bb[p] = b[p] * b[p];
      ab[p] = a[p] * b[p];
    }
    const auto mu_a = filter(a, w, h, k), mu_b = filter(b, w, h, k);
    const auto s_aa = filter(aa, w, h, k), s_bb = filter(bb, w, h, k), s_ab = filter(ab, w, h, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = s_aa[i] - mu_a[i] * mu_a[i];
      const double vb = s_bb[i] - mu_b[i] * mu_b[i];
      const double cov = s_ab[i] - mu_a[i] * mu_b[i];
      sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / pred.channels;
}

ImageMetrics image_metrics(const Image& pred, const Image& gt) {
  return {psnr(pred, gt), ssim(pred, gt)};
}

double mask_iou(const Image& pred, const Image& gt) {
  require_same(pred, gt, "mask_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool a = pred.data[i] >= 0.5, b = gt.data[i] >= 0.5;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Vec3> vertex_normals(std::span<const Vec3> positions, std::span<const Face> faces) {
  std::vector<Vec3> n(positions.size(), Vec3::Zero());
  for (const Face& f : faces) {
    const auto& i = f.vertex_indices;
    // |cross| is twice the area, so the unnormalized cross product is area-weighted.
    const Vec3 c = (positions[i[1]] - positions[i[0]]).cross(positions[i[2]] - positions[i[0]]);
    for (int k = 0; k < 3; ++k) n[i[k]] += c;
  }
  for (Vec3& v : n) {
    const double len = v.norm();
    if (len > 0.0) v /= len;
  }
  return n;
}

std::vector<std::size_t> nearest_neighbors(std::span<const Vec3> cloud,
                                           std::span<const Vec3> queries) {
  if (cloud.empty()) throw ArgumentError("nearest_neighbors: empty point set");
  Vec3 lo = cloud[0], hi = cloud[0];
  for (const Vec3& p : cloud) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = (hi - lo).cwiseMax(Vec3::Constant(1e-12));
  const double cells_per_axis = std::max(1.0, std::cbrt(static_cast<double>(cloud.size())));
  const double cell = extent.maxCoeff() / cells_per_axis;
  using Key = std::int64_t;
  auto coord = [&](const Vec3& p, int axis) {
    return static_cast<std::int64_t>(std::floor((p[axis] - lo[axis]) / cell));
  };
  auto key = [](std::int64_t x, std::int64_t y, std::int64_t z) -> Key {
    return (x * 73856093) ^ (y * 19349663) ^ (z * 83492791);
  };
  std::int64_t max_c[3];
  for (int a = 0; a < 3; ++a) max_c[a] = coord(hi, a);
  std::unordered_map<Key, std::vector<std::size_t>> grid;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    grid[key(coord(cloud[i], 0), coord(cloud[i], 1), coord(cloud[i], 2))].push_back(i);
  }

  std::vector<std::size_t> out(queries.size());
  parallel_chunks(queries.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      const Vec3& p = queries[q];
      std::int64_t c[3];
      for (int a = 0; a < 3; ++a) c[a] = std::clamp<std::int64_t>(coord(p, a), 0, max_c[a]);
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_i = 0;
      // Grow shells until the best distance is certainly inside the searched box.
      const std::int64_t max_r = std::max({max_c[0], max_c[1], max_c[2]}) + 1;
      for (std::int64_t r = 0; r <= max_r; ++r) {
        for (std::int64_t x = c[0] - r; x <= c[0] + r; ++x) {
          for (std::int64_t y = c[1] - r; y <= c[1] + r; ++y) {
            for (std::int64_t z = c[2] - r; z <= c[2] + r; ++z) {
              if (std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])}) != r) continue;
              if (x < 0 || y < 0 || z < 0 || x > max_c[0] || y > max_c[1] || z > max_c[2]) continue;
              auto it = grid.find(key(x, y, z));
              if (it == grid.end()) continue;
              for (std::size_t i : it->second) {
                const double d = (cloud[i] - p).squaredNorm();
                if (d < best || (d == best && i < best_i)) {
                  best = d;
                  best_i = i;
                }
              }
            }
          }
        }
        // Points outside the searched box lie at least `reach` away from p.
        double reach = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
          const double lo_edge = lo[a] + (c[a] - r) * cell;
          const double hi_edge = lo[a] + (c[a] + r + 1) * cell;
          reach = std::min({reach, p[a] - lo_edge, hi_edge - p[a]});
        }
        if (reach > 0.0 && best < reach * reach) break;
      }
      out[q] = best_i;
    }
  });
  return out;
}

GeometryMetrics geometry_metrics(std::span<const Vec3> pred_positions,
                                 std::span<const Face> pred_faces,
                                 std::span<const Vec3> gt_positions,
                                 std::span<const Face> gt_faces) {
  if (pred_positions.empty() || gt_positions.empty()) {
    throw ArgumentError("geometry_metrics: empty mesh");
  }
  const auto nn_gt = nearest_neighbors(pred_positions, gt_positions);
  const auto nn_pred = nearest_neighbors(gt_positions, pred_positions);
  double sum_gt = 0.0, sum_pred = 0.0;
  for (std::size_t i = 0; i < gt_positions.size(); ++i) {
    sum_gt += (gt_positions[i] - pred_positions[nn_gt[i]]).squaredNorm();
  }
  for (std::size_t i = 0; i < pred_positions.size(); ++i) {
    sum_pred += (pred_positions[i] - gt_positions[nn_pred[i]]).squaredNorm();
  }
  GeometryMetrics m;
  m.chamfer = 0.5 * (sum_gt / static_cast<double>(gt_positions.size()) +
                     sum_pred / static_cast<double>(pred_positions.size()));
  const auto n_pred = vertex_normals(pred_positions, pred_faces);
  const auto n_gt = vertex_normals(gt_positions, gt_faces);
  double nc = 0.0;
  for (std::size_t i = 0; i < gt_positions.size(); ++i) {
    nc += 1.0 - (n_gt[i] - n_pred[nn_gt[i]]).norm();
  }
  m.normal_consistency = nc / static_cast<double>(gt_positions.size());
  return m;
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os.precision(10);
  for (const auto& [k, v] : entries) os << k << '=' << v << '\n';
  return os.str();
}

}  // namespace gom
