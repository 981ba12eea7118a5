#include "gom/test_rig.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gom/error.hpp"

namespace gom {

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

Avatar make_test_rig(std::size_t joints, std::size_t segments, std::size_t radial,
                     const TestRigOptions& options) {
  if (joints < 2) throw ArgumentError("make_test_rig: need at least 2 joints");
  if (segments < joints) throw ArgumentError("make_test_rig: segments must be >= joints");
  if (radial < 3) throw ArgumentError("make_test_rig: radial must be >= 3");
  if (!(options.bone_length > 0.0) || !(options.radius > 0.0) || !(options.sharpness > 0.0)) {
    throw ArgumentError("make_test_rig: lengths and sharpness must be positive");
  }
  const double len = options.bone_length, r = options.radius;
  const double height = len * static_cast<double>(joints);

  Avatar a;
  Rig& rig = a.rig;
  for (std::size_t j = 0; j < joints; ++j) {
    rig.parents.push_back(static_cast<int>(j) - 1);
    rig.rest_rotations.push_back(Mat3::Identity());
    rig.rest_translations.push_back(Vec3(0.0, len * static_cast<double>(j), 0.0));
    rig.names.push_back("joint" + std::to_string(j));
  }

  std::vector<Vec3> pos;
  for (std::size_t k = 0; k < segments; ++k) {
    const double y = height * static_cast<double>(k) / static_cast<double>(segments - 1);
    for (std::size_t i = 0; i < radial; ++i) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(radial);
      pos.emplace_back(r * std::cos(th), y, r * std::sin(th));
    }
  }
  const std::uint32_t bottom = static_cast<std::uint32_t>(pos.size());
  pos.emplace_back(0.0, -0.5 * r, 0.0);
  const std::uint32_t top = bottom + 1;
  pos.emplace_back(0.0, height + 0.5 * r, 0.0);

  auto ring = [&](std::size_t k, std::size_t i) {
    return static_cast<std::uint32_t>(k * radial + i % radial);
  };
  auto add = [&](std::uint32_t x, std::uint32_t y, std::uint32_t z) {
    Face f;
    f.vertex_indices = {x, y, z};
    a.faces.push_back(f);
  };
  for (std::size_t i = 0; i < radial; ++i) add(bottom, ring(0, i), ring(0, i + 1));
  for (std::size_t k = 0; k + 1 < segments; ++k) {
    for (std::size_t i = 0; i < radial; ++i) {
      add(ring(k, i), ring(k + 1, i), ring(k, i + 1));
      add(ring(k, i + 1), ring(k + 1, i), ring(k + 1, i + 1));
    }
  }
  for (std::size_t i = 0; i < radial; ++i) add(top, ring(segments - 1, i + 1), ring(segments - 1, i));

  for (const Vec3& p : pos) {
    Vertex v;
    v.position = p;
    Eigen::VectorXd logits(joints);
    for (std::size_t j = 0; j < joints; ++j) {
      const Vec3& c = rig.rest_translations[j];
      logits[static_cast<Eigen::Index>(j)] =
          -options.sharpness * segment_distance(p, c, c + Vec3(0.0, len, 0.0));
    }
    const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    v.weights = e / e.sum();
    a.vertices.push_back(std::move(v));
  }
  return a;
}

}  // namespace gom
