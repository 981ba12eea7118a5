#include "gom/splatter.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gom/error.hpp"
#include "gom/parallel.hpp"

namespace gom {

std::optional<Splat2D> project_gaussian(const WorldGaussian& g, const Camera& cam) {
  const Vec3 m = cam.to_camera(g.mean);
  if (!(m.z() > kNearPlane)) return std::nullopt;
  const double z = m.z();
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx / z, 0.0, -cam.fx * m.x() / (z * z),
         0.0, cam.fy / z, -cam.fy * m.y() / (z * z);
  const Eigen::Matrix<double, 2, 3> t = jac * cam.rotation;
  Splat2D s;
  s.mean = cam.project(m);
  s.cov = t * g.covariance * t.transpose();
  s.cov(0, 0) += kDilation;
  s.cov(1, 1) += kDilation;
  s.depth = z;
  s.color = g.color;
  return s;
}

WorldGaussianGrad project_gaussian_vjp(const WorldGaussian& g, const Camera& cam,
                                       const SplatGrad& grad) {
  const Vec3 m = cam.to_camera(g.mean);
  const double x = m.x(), y = m.y(), z = m.z();
  const double fx = cam.fx, fy = cam.fy;
  Eigen::Matrix<double, 2, 3> jac;
  jac << fx / z, 0.0, -fx * x / (z * z),
         0.0, fy / z, -fy * y / (z * z);
  const Eigen::Matrix<double, 2, 3> t = jac * cam.rotation;

  WorldGaussianGrad out;
  out.cov = t.transpose() * grad.cov * t;
  const Eigen::Matrix<double, 2, 3> g_t = (grad.cov + grad.cov.transpose()) * t * g.covariance;
  const Eigen::Matrix<double, 2, 3> g_jac = g_t * cam.rotation.transpose();

  const double z2 = z * z, z3 = z2 * z;
  Vec3 gm;
  gm.x() = g_jac(0, 2) * (-fx / z2) + grad.mean.x() * fx / z;
  gm.y() = g_jac(1, 2) * (-fy / z2) + grad.mean.y() * fy / z;
  gm.z() = g_jac(0, 0) * (-fx / z2) + g_jac(0, 2) * (2.0 * fx * x / z3) +
           g_jac(1, 1) * (-fy / z2) + g_jac(1, 2) * (2.0 * fy * y / z3) -
           grad.mean.x() * fx * x / z2 - grad.mean.y() * fy * y / z2;
  out.mean = cam.rotation.transpose() * gm;
  out.color = grad.color;
  return out;
}

namespace {

// Screen-space splat data in the layout the inner loop reads.
struct PackedSplat {
  double mx, my;
  double ca, cb, cc;  // inverse covariance [[ca, cb], [cb, cc]]
  double r, g, b;
  std::uint32_t index;
  int x0, x1, y0, y1;  // pixels inside the cutoff box, inclusive
};

struct Binning {
  std::vector<PackedSplat> packed;  // depth order
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<std::uint32_t>> tiles;  // indices into `packed`
  double cutoff_q = std::numeric_limits<double>::infinity();
};

void check_splats(std::span<const Splat2D> splats, int width, int height) {
  if (width <= 0 || height <= 0) throw ArgumentError("rasterize: resolution must be positive");
  for (std::size_t i = 0; i < splats.size(); ++i) {
    const Splat2D& s = splats[i];
    if (!s.mean.allFinite() || !s.cov.allFinite() || !std::isfinite(s.depth) ||
        !s.color.allFinite()) {
      throw ArgumentError("rasterize: splat " + std::to_string(i) + " is not finite");
    }
    const double det = s.cov.determinant();
    if (!(det > 0.0) || !(s.cov(0, 0) > 0.0)) {
      throw ArgumentError("rasterize: splat " + std::to_string(i) +
                          " covariance is not positive definite");
    }
  }
}

std::vector<std::uint32_t> depth_order(std::span<const Splat2D> splats) {
  std::vector<std::uint32_t> order(splats.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return splats[a].depth < splats[b].depth;
  });
  return order;
}

PackedSplat pack(const Splat2D& s, std::uint32_t index) {
  const double det = s.cov(0, 0) * s.cov(1, 1) - s.cov(0, 1) * s.cov(1, 0);
  PackedSplat p;
  p.mx = s.mean.x();
  p.my = s.mean.y();
  p.ca = s.cov(1, 1) / det;
  p.cb = -0.5 * (s.cov(0, 1) + s.cov(1, 0)) / det;
  p.cc = s.cov(0, 0) / det;
  p.r = s.color.x();
  p.g = s.color.y();
  p.b = s.color.z();
  p.index = index;
  return p;
}

Binning bin(std::span<const Splat2D> splats, int width, int height, const RasterSettings& settings) {
  Binning out;
  out.tiles_x = (width + kTileSize - 1) / kTileSize;
  out.tiles_y = (height + kTileSize - 1) / kTileSize;
  out.tiles.resize(static_cast<std::size_t>(out.tiles_x) * out.tiles_y);
  const bool bounded = std::isfinite(settings.cutoff_sigma);
  out.cutoff_q = bounded ? settings.cutoff_sigma * settings.cutoff_sigma
                         : std::numeric_limits<double>::infinity();

  const std::vector<std::uint32_t> order = depth_order(splats);
  out.packed.reserve(order.size());
  for (std::uint32_t idx : order) {
    const Splat2D& s = splats[idx];
    const auto slot = static_cast<std::uint32_t>(out.packed.size());
    PackedSplat& p = out.packed.emplace_back(pack(s, idx));
    p.x0 = 0;
    p.x1 = width - 1;
    p.y0 = 0;
    p.y1 = height - 1;
    int tx0 = 0, tx1 = out.tiles_x - 1, ty0 = 0, ty1 = out.tiles_y - 1;
    if (bounded) {
      // Exact bounding box of the cutoff ellipse, in pixel-center coordinates.
      const double rx = settings.cutoff_sigma * std::sqrt(s.cov(0, 0));
      const double ry = settings.cutoff_sigma * std::sqrt(s.cov(1, 1));
      const double px0 = std::ceil(s.mean.x() - rx - 0.5);
      const double px1 = std::floor(s.mean.x() + rx - 0.5);
      const double py0 = std::ceil(s.mean.y() - ry - 0.5);
      const double py1 = std::floor(s.mean.y() + ry - 0.5);
      if (px1 < 0.0 || py1 < 0.0 || px0 > width - 1 || py0 > height - 1 || px0 > px1 ||
          py0 > py1) {
        continue;
      }
      p.x0 = static_cast<int>(std::max(px0, 0.0));
      p.x1 = static_cast<int>(std::min(px1, width - 1.0));
      p.y0 = static_cast<int>(std::max(py0, 0.0));
      p.y1 = static_cast<int>(std::min(py1, height - 1.0));
      tx0 = p.x0 / kTileSize;
      tx1 = p.x1 / kTileSize;
      ty0 = p.y0 / kTileSize;
      ty1 = p.y1 / kTileSize;
    }
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) {
        out.tiles[static_cast<std::size_t>(ty) * out.tiles_x + tx].push_back(slot);
      }
    }
  }
  return out;
}

struct Contribution {
  std::uint32_t slot;
  double alpha;
  double transmittance;  // before this splat
  bool clamped;
};

// Composites one pixel. When `record` is set, every applied contribution is appended.
template <bool Record>
void composite_pixel(const Binning& b, const std::vector<std::uint32_t>& row, int x, int y,
                     bool early_termination, double* rgb, double* mask,
                     std::vector<Contribution>* record) {
  const double px = x + 0.5, py = y + 0.5;
  double t = 1.0;
  double cr = 0.0, cg = 0.0, cbl = 0.0, m = 0.0;
  for (std::uint32_t slot : row) {
    const PackedSplat& s = b.packed[slot];
    if (x < s.x0 || x > s.x1) continue;
    const double dx = px - s.mx;
    const double dy = py - s.my;
    const double q = s.ca * dx * dx + 2.0 * s.cb * dx * dy + s.cc * dy * dy;
    if (q > b.cutoff_q) continue;
    const double g = std::exp(-0.5 * q);
    const bool clamped = g > kMaxAlpha;
    const double alpha = clamped ? kMaxAlpha : g;
    const double w = alpha * t;
    cr += w * s.r;
    cg += w * s.g;
    cbl += w * s.b;
    m += w;
    if constexpr (Record) record->push_back({slot, alpha, t, clamped});
    t *= 1.0 - alpha;
    if (early_termination && t < kMinTransmittance) break;
  }
  rgb[0] = cr;
  rgb[1] = cg;
  rgb[2] = cbl;
  *mask = m;
}

// Splats of a tile list whose cutoff box covers row y, in depth order.
void row_list(const Binning& b, const std::vector<std::uint32_t>& list, int y,
              std::vector<std::uint32_t>& row) {
  row.clear();
  for (std::uint32_t slot : list) {
    const PackedSplat& s = b.packed[slot];
    if (y >= s.y0 && y <= s.y1) row.push_back(slot);
  }
}

template <typename TileBody>
void for_each_tile(const Binning& b, TileBody&& body) {
  const std::size_t n = b.tiles.size();
  parallel_chunks(n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) body(chunk, static_cast<int>(t % b.tiles_x),
                                                   static_cast<int>(t / b.tiles_x), b.tiles[t]);
  });
}

}  // namespace

RasterOutput rasterize(std::span<const Splat2D> splats, int width, int height,
                       const RasterSettings& settings) {
  check_splats(splats, width, height);
  RasterOutput out{Image(width, height, 3), Image(width, height, 1)};
  const Binning b = bin(splats, width, height, settings);
  for_each_tile(b, [&](std::size_t, int tx, int ty, const std::vector<std::uint32_t>& list) {
    if (list.empty()) return;
    const int x1 = std::min(width, (tx + 1) * kTileSize);
    const int y1 = std::min(height, (ty + 1) * kTileSize);
    std::vector<std::uint32_t> row;
    for (int y = ty * kTileSize; y < y1; ++y) {
      row_list(b, list, y, row);
      if (row.empty()) continue;
      for (int x = tx * kTileSize; x < x1; ++x) {
        composite_pixel<false>(b, row, x, y, settings.early_termination,
                               &out.albedo.at(x, y, 0), &out.mask.at(x, y, 0), nullptr);
      }
    }
  });
  return out;
}

RasterOutput rasterize_reference(std::span<const Splat2D> splats, int width, int height) {
  check_splats(splats, width, height);
  RasterOutput out{Image(width, height, 3), Image(width, height, 1)};
  const std::vector<std::uint32_t> order = depth_order(splats);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec2 pix(x + 0.5, y + 0.5);
      double t = 1.0;
      Vec3 c = Vec3::Zero();
      double m = 0.0;
      for (std::uint32_t idx : order) {
        const Splat2D& s = splats[idx];
        const Vec2 d = pix - s.mean;
        const double q = d.dot(s.cov.inverse() * d);
        const double alpha = std::min(kMaxAlpha, std::exp(-0.5 * q));
        c += alpha * t * s.color;
        m += alpha * t;
        t *= 1.0 - alpha;
      }
      for (int k = 0; k < 3; ++k) out.albedo.at(x, y, k) = c[k];
      out.mask.at(x, y) = m;
    }
  }
  return out;
}

std::vector<SplatGrad> rasterize_backward(std::span<const Splat2D> splats, int width, int height,
                                          const RasterSettings& settings,
                                          const Image& grad_albedo, const Image& grad_mask) {
  check_splats(splats, width, height);
  if (grad_albedo.width != width || grad_albedo.height != height || grad_albedo.channels != 3 ||
      grad_mask.width != width || grad_mask.height != height || grad_mask.channels != 1) {
    throw ArgumentError("rasterize_backward: gradient image shape mismatch");
  }
  const Binning b = bin(splats, width, height, settings);
  const std::size_t chunks = chunk_count(b.tiles.size());
  // Gradients w.r.t. packed parameters: mean (2), conic (3: a, b, c), color (3).
  struct PackedGrad {
    double mx = 0, my = 0, ca = 0, cb = 0, cc = 0, r = 0, g = 0, bl = 0;
  };
  std::vector<std::vector<PackedGrad>> partial(chunks, std::vector<PackedGrad>(b.packed.size()));

  for_each_tile(b, [&](std::size_t chunk, int tx, int ty, const std::vector<std::uint32_t>& list) {
    if (list.empty()) return;
    std::vector<PackedGrad>& acc = partial[chunk];
    std::vector<Contribution> contrib;
    std::vector<std::uint32_t> row;
    const int x1 = std::min(width, (tx + 1) * kTileSize);
    const int y1 = std::min(height, (ty + 1) * kTileSize);
    for (int y = ty * kTileSize; y < y1; ++y) {
      row_list(b, list, y, row);
      if (row.empty()) continue;
      for (int x = tx * kTileSize; x < x1; ++x) {
        const double gr = grad_albedo.at(x, y, 0);
        const double gg = grad_albedo.at(x, y, 1);
        const double gb = grad_albedo.at(x, y, 2);
        const double gm = grad_mask.at(x, y);
        if (gr == 0.0 && gg == 0.0 && gb == 0.0 && gm == 0.0) continue;
        const double px = x + 0.5, py = y + 0.5;
        contrib.clear();
        double rgb[3], m;
        composite_pixel<true>(b, row, x, y, settings.early_termination, rgb, &m, &contrib);
        // Suffix sums of the contributions behind the current splat.
        double sr = 0, sg = 0, sb = 0, sm = 0;
        for (std::size_t k = contrib.size(); k-- > 0;) {
          const Contribution& c = contrib[k];
          const PackedSplat& s = b.packed[c.slot];
          const double w = c.alpha * c.transmittance;
          PackedGrad& g = acc[c.slot];
          g.r += gr * w;
          g.g += gg * w;
          g.bl += gb * w;
          const double inv = 1.0 / (1.0 - c.alpha);
          const double g_alpha = gr * (s.r * c.transmittance - sr * inv) +
                                 gg * (s.g * c.transmittance - sg * inv) +
                                 gb * (s.b * c.transmittance - sb * inv) +
                                 gm * (c.transmittance - sm * inv);
          sr += w * s.r;
          sg += w * s.g;
          sb += w * s.b;
          sm += w;
          if (c.clamped) continue;
          const double g_q = -0.5 * c.alpha * g_alpha;
          const double dx = px - s.mx, dy = py - s.my;
          g.mx -= g_q * 2.0 * (s.ca * dx + s.cb * dy);
          g.my -= g_q * 2.0 * (s.cb * dx + s.cc * dy);
          g.ca += g_q * dx * dx;
          g.cb += g_q * 2.0 * dx * dy;
          g.cc += g_q * dy * dy;
        }
      }
    }
  });

  std::vector<SplatGrad> out(splats.size());
  for (std::size_t slot = 0; slot < b.packed.size(); ++slot) {
    PackedGrad total;
    for (std::size_t c = 0; c < chunks; ++c) {
      const PackedGrad& p = partial[c][slot];
      total.mx += p.mx; total.my += p.my;
      total.ca += p.ca; total.cb += p.cb; total.cc += p.cc;
      total.r += p.r; total.g += p.g; total.bl += p.bl;
    }
    const PackedSplat& s = b.packed[slot];
    SplatGrad& g = out[s.index];
    g.mean = Vec2(total.mx, total.my);
    g.color = Vec3(total.r, total.g, total.bl);
    // conic P = cov^{-1}; the off-diagonal gradient is split evenly over the two
    // symmetric entries. d(cov) = -P d(P) P.
    Mat2 p;
    p << s.ca, s.cb, s.cb, s.cc;
    Mat2 g_p;
    g_p << total.ca, 0.5 * total.cb, 0.5 * total.cb, total.cc;
    g.cov = -p * g_p * p;
  }
  return out;
}

}  // namespace gom
