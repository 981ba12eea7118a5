#include "gom/shading.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "gom/articulator.hpp"
#include "gom/error.hpp"
#include "gom/parallel.hpp"
#include "gom/splatter.hpp"

namespace gom {

namespace {

struct ProjectedFace {
  std::array<Vec3, 3> cam;  // camera-space vertices
  std::array<Vec2, 3> pix;  // screen-space vertices
  bool valid = false;
};

ProjectedFace project_face(std::span<const Vec3> positions, const Face& f, const Camera& cam) {
  ProjectedFace pf;
  for (int k = 0; k < 3; ++k) {
    const std::uint32_t i = f.vertex_indices[k];
    if (i >= positions.size()) throw ArgumentError("face vertex index out of range");
    pf.cam[k] = cam.to_camera(positions[i]);
    if (!(pf.cam[k].z() > kNearPlane)) return pf;
    pf.pix[k] = cam.project(pf.cam[k]);
  }
  pf.valid = true;
  return pf;
}

double edge_fn(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// Oriented camera-space face normal; `sign` flips it toward the viewer.
Vec3 raw_normal(const ProjectedFace& pf, double& sign) {
  const Vec3 n = (pf.cam[1] - pf.cam[0]).cross(pf.cam[2] - pf.cam[0]);
  const Vec3 centroid = (pf.cam[0] + pf.cam[1] + pf.cam[2]) / 3.0;
  sign = n.dot(centroid) > 0.0 ? -1.0 : 1.0;
  return sign * n;
}

}  // namespace

NormalMap raster_normals(std::span<const Vec3> positions, std::span<const Face> faces,
                         const Camera& cam) {
  validate(cam);
  const int w = cam.width, h = cam.height;
  NormalMap map;
  map.width = w;
  map.height = h;
  map.normals.assign(static_cast<std::size_t>(w) * h, Vec3::Zero());
  map.face_ids.assign(static_cast<std::size_t>(w) * h, -1);

  std::vector<ProjectedFace> projected(faces.size());
  std::vector<Vec3> face_normal(faces.size(), Vec3::Zero());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    projected[f] = project_face(positions, faces[f], cam);
    if (!projected[f].valid) continue;
    double sign;
    const Vec3 n = raw_normal(projected[f], sign);
    const double len = n.norm();
    if (len > 0.0) face_normal[f] = n / len;
    else projected[f].valid = false;
  }

  // Row blocks own disjoint scanlines, each with its own depth buffer.
  parallel_chunks(static_cast<std::size_t>(h), [&](std::size_t, std::size_t y_begin,
                                                   std::size_t y_end) {
    std::vector<double> inv_depth(static_cast<std::size_t>(w) * (y_end - y_begin), 0.0);
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const ProjectedFace& pf = projected[f];
      if (!pf.valid) continue;
      const Vec2 &a = pf.pix[0], &b = pf.pix[1], &c = pf.pix[2];
      const double area = edge_fn(a, b, c);
      if (area == 0.0) continue;
      const double xmin = std::min({a.x(), b.x(), c.x()});
      const double xmax = std::max({a.x(), b.x(), c.x()});
      const double ymin = std::min({a.y(), b.y(), c.y()});
      const double ymax = std::max({a.y(), b.y(), c.y()});
      const int x0 = std::max(0, static_cast<int>(std::ceil(xmin - 0.5)));
      const int x1 = std::min(w - 1, static_cast<int>(std::floor(xmax - 0.5)));
      const int y0 = std::max(static_cast<int>(y_begin), static_cast<int>(std::ceil(ymin - 0.5)));
      const int y1 = std::min(static_cast<int>(y_end) - 1, static_cast<int>(std::floor(ymax - 0.5)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const Vec2 p(x + 0.5, y + 0.5);
          double b0 = edge_fn(b, c, p) / area;
          double b1 = edge_fn(c, a, p) / area;
          double b2 = edge_fn(a, b, p) / area;
          if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) continue;
          const double inv_z = b0 / pf.cam[0].z() + b1 / pf.cam[1].z() + b2 / pf.cam[2].z();
          double& zbuf = inv_depth[static_cast<std::size_t>(y - y_begin) * w + x];
          if (inv_z > zbuf) {
            zbuf = inv_z;
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            map.face_ids[pix] = static_cast<std::int32_t>(f);
            map.normals[pix] = face_normal[f];
          }
        }
      }
    }
  });
  return map;
}

std::vector<Vec3> raster_normals_vjp(std::span<const Vec3> positions, std::span<const Face> faces,
                                     const Camera& cam, const NormalMap& map,
                                     std::span<const Vec3> grad_normals) {
  std::vector<Vec3> grad(positions.size(), Vec3::Zero());
  std::vector<Vec3> g_face(faces.size(), Vec3::Zero());
  std::vector<char> touched(faces.size(), 0);
  for (std::size_t p = 0; p < map.face_ids.size(); ++p) {
    const std::int32_t f = map.face_ids[p];
    if (f < 0) continue;
    g_face[f] += grad_normals[p];
    touched[f] = 1;
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (!touched[f]) continue;
    const ProjectedFace pf = project_face(positions, faces[f], cam);
    double sign;
    const Vec3 raw = raw_normal(pf, sign);
    const double len = raw.norm();
    const Vec3 n = raw / len;
    const Vec3 g_raw = (g_face[f] - n * n.dot(g_face[f])) / len;
    // raw = sign * R (e1 x e2), e1 = p2 - p1, e2 = p3 - p1 (world space)
    const Vec3 g_cross = sign * (cam.rotation.transpose() * g_raw);
    const auto& idx = faces[f].vertex_indices;
    const Vec3 e1 = positions[idx[1]] - positions[idx[0]];
    const Vec3 e2 = positions[idx[2]] - positions[idx[0]];
    const Vec3 g_e1 = e2.cross(g_cross);
    const Vec3 g_e2 = g_cross.cross(e1);
    grad[idx[1]] += g_e1;
    grad[idx[2]] += g_e2;
    grad[idx[0]] -= g_e1 + g_e2;
  }
  return grad;
}

double default_silhouette_sigma(const Camera& cam) { return 1e-4 * cam.width; }

namespace {

// Faces farther outside than this many sigmas contribute below 1e-13.
constexpr double kSilhouetteMargin = 30.0;

struct EdgeHit {
  double dist;
  int edge;     // 0: (0,1), 1: (1,2), 2: (2,0)
  double t;     // closest-point parameter on the edge
  Vec2 dir;     // unit vector from closest point to the pixel
};

// Signed distance to the projected boundary, positive inside.
double signed_distance(const ProjectedFace& pf, const Vec2& p, EdgeHit* hit) {
  EdgeHit best{std::numeric_limits<double>::infinity(), 0, 0.0, Vec2::Zero()};
  for (int e = 0; e < 3; ++e) {
    const Vec2& a = pf.pix[e];
    const Vec2& b = pf.pix[(e + 1) % 3];
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Vec2 r = p - (a + t * ab);
    const double d = r.norm();
    if (d < best.dist) best = {d, e, t, d > 0.0 ? Vec2(r / d) : Vec2::Zero()};
  }
  const double e0 = edge_fn(pf.pix[0], pf.pix[1], p);
  const double e1 = edge_fn(pf.pix[1], pf.pix[2], p);
  const double e2 = edge_fn(pf.pix[2], pf.pix[0], p);
  const bool inside = (e0 > 0 && e1 > 0 && e2 > 0) || (e0 < 0 && e1 < 0 && e2 < 0);
  if (hit) *hit = best;
  return inside ? best.dist : -best.dist;
}

struct FaceBins {
  std::vector<ProjectedFace> faces;
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<std::uint32_t>> tiles;
};

FaceBins bin_faces(std::span<const Vec3> positions, std::span<const Face> faces, const Camera& cam,
                   double sigma) {
  validate(cam);
  if (!(sigma > 0.0)) throw ArgumentError("soft_silhouette: sigma must be positive");
  FaceBins bins;
  bins.tiles_x = (cam.width + kTileSize - 1) / kTileSize;
  bins.tiles_y = (cam.height + kTileSize - 1) / kTileSize;
  bins.tiles.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);
  bins.faces.resize(faces.size());
  const double margin = kSilhouetteMargin * sigma;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    ProjectedFace& pf = bins.faces[f];
    pf = project_face(positions, faces[f], cam);
    if (!pf.valid) continue;
    const Vec2 &a = pf.pix[0], &b = pf.pix[1], &c = pf.pix[2];
    const double x0 = std::min({a.x(), b.x(), c.x()}) - margin - 0.5;
    const double x1 = std::max({a.x(), b.x(), c.x()}) + margin - 0.5;
    const double y0 = std::min({a.y(), b.y(), c.y()}) - margin - 0.5;
    const double y1 = std::max({a.y(), b.y(), c.y()}) + margin - 0.5;
    if (x1 < 0 || y1 < 0 || x0 > cam.width - 1 || y0 > cam.height - 1) continue;
    const int tx0 = static_cast<int>(std::max(0.0, std::ceil(x0))) / kTileSize;
    const int tx1 = static_cast<int>(std::min(cam.width - 1.0, std::floor(x1))) / kTileSize;
    const int ty0 = static_cast<int>(std::max(0.0, std::ceil(y0))) / kTileSize;
    const int ty1 = static_cast<int>(std::min(cam.height - 1.0, std::floor(y1))) / kTileSize;
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) {
        bins.tiles[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(
            static_cast<std::uint32_t>(f));
      }
    }
  }
  return bins;
}

}  // namespace

Image soft_silhouette(std::span<const Vec3> positions, std::span<const Face> faces,
                      const Camera& cam, double sigma) {
  const FaceBins bins = bin_faces(positions, faces, cam, sigma);
  Image mask(cam.width, cam.height, 1);
  const double cutoff = -kSilhouetteMargin * sigma;
  parallel_chunks(bins.tiles.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const auto& list = bins.tiles[t];
      if (list.empty()) continue;
      const int tx = static_cast<int>(t % bins.tiles_x), ty = static_cast<int>(t / bins.tiles_x);
      for (int y = ty * kTileSize; y < std::min(cam.height, (ty + 1) * kTileSize); ++y) {
        for (int x = tx * kTileSize; x < std::min(cam.width, (tx + 1) * kTileSize); ++x) {
          const Vec2 p(x + 0.5, y + 0.5);
          double outside = 1.0;
          for (std::uint32_t f : list) {
            const double d = signed_distance(bins.faces[f], p, nullptr);
            if (d < cutoff) continue;
            outside *= sigmoid(-d / sigma);
          }
          mask.at(x, y) = 1.0 - outside;
        }
      }
    }
  });
  return mask;
}

std::vector<Vec3> soft_silhouette_vjp(std::span<const Vec3> positions, std::span<const Face> faces,
                                      const Camera& cam, double sigma, const Image& grad_mask) {
  const FaceBins bins = bin_faces(positions, faces, cam, sigma);
  if (grad_mask.width != cam.width || grad_mask.height != cam.height || grad_mask.channels != 1) {
    throw ArgumentError("soft_silhouette_vjp: gradient shape mismatch");
  }
  const double cutoff = -kSilhouetteMargin * sigma;
  const std::size_t chunks = chunk_count(bins.tiles.size());
  std::vector<std::vector<std::array<Vec2, 3>>> partial(
      chunks, std::vector<std::array<Vec2, 3>>(faces.size(),
                                               {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()}));

  parallel_chunks(bins.tiles.size(), [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& acc = partial[chunk];
    struct Term {
      std::uint32_t face;
      double out;  // 1 - D
      double d;
      EdgeHit hit;
    };
    std::vector<Term> terms;
    std::vector<double> suffix;
    for (std::size_t t = begin; t < end; ++t) {
      const auto& list = bins.tiles[t];
      if (list.empty()) continue;
      const int tx = static_cast<int>(t % bins.tiles_x), ty = static_cast<int>(t / bins.tiles_x);
      for (int y = ty * kTileSize; y < std::min(cam.height, (ty + 1) * kTileSize); ++y) {
        for (int x = tx * kTileSize; x < std::min(cam.width, (tx + 1) * kTileSize); ++x) {
          const double g = grad_mask.at(x, y);
          if (g == 0.0) continue;
          const Vec2 p(x + 0.5, y + 0.5);
          terms.clear();
          for (std::uint32_t f : list) {
            EdgeHit hit;
            const double d = signed_distance(bins.faces[f], p, &hit);
            if (d < cutoff) continue;
            terms.push_back({f, sigmoid(-d / sigma), d, hit});
          }
          suffix.assign(terms.size() + 1, 1.0);
          for (std::size_t k = terms.size(); k-- > 0;) suffix[k] = suffix[k + 1] * terms[k].out;
          double prefix = 1.0;
          for (std::size_t k = 0; k < terms.size(); ++k) {
            const Term& term = terms[k];
            const double others = prefix * suffix[k + 1];
            prefix *= term.out;
            // dM/dD = prod_{others}(1 - D), dD/dd = D (1 - D) / sigma
            const double dd = g * others * (1.0 - term.out) * term.out / sigma;
            if (dd == 0.0 || term.hit.dist == 0.0) continue;
            // d = +-|p - q|; d|p - q| / d(endpoint) = -dir * weight
            const double s = term.d >= 0.0 ? 1.0 : -1.0;
            const int e = term.hit.edge;
            acc[term.face][e] -= s * dd * (1.0 - term.hit.t) * term.hit.dir;
            acc[term.face][(e + 1) % 3] -= s * dd * term.hit.t * term.hit.dir;
          }
        }
      }
    }
  });

  std::vector<Vec3> grad(positions.size(), Vec3::Zero());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const ProjectedFace& pf = bins.faces[f];
    if (!pf.valid) continue;
    for (int k = 0; k < 3; ++k) {
      Vec2 g2 = Vec2::Zero();
      for (std::size_t c = 0; c < chunks; ++c) g2 += partial[c][f][k];
      if (g2.isZero(0.0)) continue;
      const Vec3& m = pf.cam[k];
      const double z = m.z();
      const Vec3 g_cam(g2.x() * cam.fx / z, g2.y() * cam.fy / z,
                       -(g2.x() * cam.fx * m.x() + g2.y() * cam.fy * m.y()) / (z * z));
      grad[faces[f].vertex_indices[k]] += cam.rotation.transpose() * g_cam;
    }
  }
  return grad;
}

Image shading_map(const NormalMap& normals, const Mlp& params, const EncodingConfig& cfg,
                  ShadingTape* tape) {
  params.require_architecture(cfg.output_dim(), kShadingWidth, kShadingLayers, 1, "shading");
  ShadingTape local;
  ShadingTape& t = tape ? *tape : local;
  t.pixels.clear();
  for (std::size_t p = 0; p < normals.face_ids.size(); ++p) {
    if (normals.face_ids[p] >= 0) t.pixels.push_back(static_cast<std::uint32_t>(p));
  }
  t.input.resize(cfg.output_dim(), static_cast<Eigen::Index>(t.pixels.size()));
  for (std::size_t k = 0; k < t.pixels.size(); ++k) {
    pos_encode_into(normals.normals[t.pixels[k]], cfg, t.input.col(k).data());
  }
  const Eigen::MatrixXd out = params.forward(t.input, t.mlp);
  t.shading = Image(normals.width, normals.height, 1, 1.0);
  for (std::size_t k = 0; k < t.pixels.size(); ++k) {
    t.shading.data[t.pixels[k]] = std::exp(out(0, k));
  }
  return t.shading;
}

std::vector<Vec3> shading_map_vjp(const NormalMap& normals, const Mlp& params,
                                  const EncodingConfig& cfg, const ShadingTape& tape,
                                  const Image& grad_shading, Mlp& grad_params) {
  std::vector<Vec3> g_normals(normals.normals.size(), Vec3::Zero());
  if (tape.pixels.empty()) return g_normals;
  Eigen::MatrixXd g_out(1, tape.pixels.size());
  for (std::size_t k = 0; k < tape.pixels.size(); ++k) {
    const std::uint32_t p = tape.pixels[k];
    g_out(0, k) = grad_shading.data[p] * tape.shading.data[p];
  }
  const Eigen::MatrixXd g_in = params.backward(tape.mlp, g_out, grad_params);
  for (std::size_t k = 0; k < tape.pixels.size(); ++k) {
    const std::uint32_t p = tape.pixels[k];
    g_normals[p] = pos_encode_vjp(normals.normals[p], cfg, g_in.col(k).data());
  }
  return g_normals;
}

Image compose_final(const Image& albedo, const Image& shading) {
  if (albedo.width != shading.width || albedo.height != shading.height || albedo.channels != 3 ||
      shading.channels != 1) {
    throw ArgumentError("compose_final: albedo and shading resolutions differ");
  }
  Image out = albedo;
  for (std::size_t p = 0; p < shading.data.size(); ++p) {
    for (int c = 0; c < 3; ++c) out.data[3 * p + c] *= shading.data[p];
  }
  return out;
}

}  // namespace gom
