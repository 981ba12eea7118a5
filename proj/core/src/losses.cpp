#include <cmath>
#include <string>

#include "gom/error.hpp"
#include "gom/fit.hpp"

namespace gom {

namespace {

double mean_abs_diff(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ArgumentError(std::string("loss_terms: ") + what + " shape " + std::to_string(a.width) +
                        "x" + std::to_string(a.height) + "x" + std::to_string(a.channels) +
                        " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                        std::to_string(b.channels));
  }
  if (a.data.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) sum += std::abs(a.data[i] - b.data[i]);
  return sum / static_cast<double>(a.data.size());
}

void check_weights(const LossWeights& w) {
  for (double v : {w.lpips, w.mask, w.reg, w.laplacian, w.normal, w.color}) {
    if (!std::isfinite(v) || v < 0.0) throw ArgumentError("loss weights must be finite and >= 0");
  }
}

}  // namespace

double laplacian_loss(std::span<const Vec3> positions, std::span<const Face> faces) {
  const auto rings = interior_neighbors(positions.size(), faces);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (rings[i].empty()) continue;
    ++count;
    Vec3 mean = Vec3::Zero();
    for (std::uint32_t j : rings[i]) mean += positions[j];
    mean /= static_cast<double>(rings[i].size());
    sum += (positions[i] - mean).squaredNorm();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double normal_consistency_loss(std::span<const Vec3> positions, std::span<const Face> faces) {
  const auto pairs = face_adjacency(faces);
  if (pairs.empty()) return 0.0;
  std::vector<Vec3> normals(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& idx = faces[f].vertex_indices;
    const Vec3 n = (positions[idx[1]] - positions[idx[0]]).cross(positions[idx[2]] - positions[idx[0]]);
    const double len = n.norm();
    normals[f] = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }
  double sum = 0.0;
  for (const auto& [a, b] : pairs) sum += 1.0 - normals[a].dot(normals[b]);
  return sum / static_cast<double>(pairs.size());
}

double color_smoothness_loss(std::span<const Face> faces) {
  const auto pairs = face_adjacency(faces);
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [a, b] : pairs) {
    for (int c = 0; c < 3; ++c) {
      sum += std::abs(sigmoid(faces[a].color_logit[c]) - sigmoid(faces[b].color_logit[c]));
    }
  }
  return sum / (3.0 * static_cast<double>(pairs.size()));
}

LossBreakdown loss_terms(const RenderOutput& render, const FrameObservation& obs,
                         const Avatar& avatar, const LossWeights& weights,
                         const PerceptualLoss* perceptual) {
  check_weights(weights);
  LossBreakdown l;
  l.image = mean_abs_diff(render.composite, obs.image, "image");
  l.mask = mean_abs_diff(render.mask, obs.mask, "mask");
  if (weights.reg > 0.0) {
    if (render.mesh_mask.data.empty()) throw ArgumentError("loss_terms: mesh mask was not rendered");
    l.mesh_mask = mean_abs_diff(render.mesh_mask, obs.mask, "mesh mask");
  }
  if (perceptual) l.perceptual = perceptual->evaluate(render.composite, obs.image, nullptr);
  const std::vector<Vec3> canonical = avatar.positions();
  l.laplacian = laplacian_loss(canonical, avatar.faces);
  l.normal = normal_consistency_loss(canonical, avatar.faces);
  l.color = color_smoothness_loss(avatar.faces);
  l.reg = l.mesh_mask + weights.laplacian * l.laplacian + weights.normal * l.normal +
          weights.color * l.color;
  l.total = l.image + weights.lpips * l.perceptual + weights.mask * l.mask + weights.reg * l.reg;
  return l;
}

}  // namespace gom
