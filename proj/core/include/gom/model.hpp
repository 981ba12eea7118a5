#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gom/so3.hpp"

namespace gom {

/// Default thickness of a face Gaussian along the surface normal (meters).
inline constexpr double kDefaultEpsilon = 1e-3;

/// Faces with smaller area are reported as degenerate (m^2).
inline constexpr double kDegenerateArea = 1e-10;

struct Vertex {
  Vec3 position = Vec3::Zero();
  Eigen::VectorXd weights;  // one skinning weight per joint

  bool operator==(const Vertex& other) const {
    return position == other.position && weights.size() == other.weights.size() &&
           weights == other.weights;
  }
};

/// A triangle plus the parameters of its local Gaussian. All activations are
/// applied at use: rotation = exp(local_rotation), scale = exp(local_log_scale),
/// albedo = sigmoid(color_logit).
struct Face {
  std::array<std::uint32_t, 3> vertex_indices{};
  Vec3 local_rotation = Vec3::Zero();
  Vec3 local_log_scale = Vec3::Zero();
  Vec3 color_logit = Vec3::Zero();

  bool operator==(const Face&) const = default;
};

struct Rig {
  std::vector<int> parents;  // -1 for the root (joint 0)
  std::vector<Mat3> rest_rotations;
  std::vector<Vec3> rest_translations;  // joint positions in rest space
  std::vector<std::string> names;

  std::size_t joint_count() const { return parents.size(); }
  bool operator==(const Rig&) const = default;
};

/// Local joint rotations relative to the parent, plus the root translation.
struct Pose {
  std::vector<Vec3> local_rotations;
  Vec3 root_translation = Vec3::Zero();

  static Pose identity(std::size_t joint_count);
  std::size_t joint_count() const { return local_rotations.size(); }
  bool operator==(const Pose&) const = default;
};

/// Global per-joint rigid transforms mapping rest space to posed space.
struct JointTransforms {
  std::vector<Mat3> rotations;
  std::vector<Vec3> translations;

  std::size_t size() const { return rotations.size(); }
};

/// The canonical (rest-pose) Gaussians-on-Mesh avatar.
struct Avatar {
  std::vector<Vertex> vertices;
  std::vector<Face> faces;
  Rig rig;
  std::uint32_t subdivision_level = 0;
  double epsilon = kDefaultEpsilon;

  std::vector<Vec3> positions() const;
  bool operator==(const Avatar&) const = default;
};

/// Joints ordered so every parent precedes its children. Throws
/// ArgumentError when the parent array is not a tree rooted at joint 0.
std::vector<int> joint_order(const Rig& rig);

JointTransforms forward_kinematics(const Rig& rig, const Pose& pose);

/// Same as above with local rotations already in matrix form.
JointTransforms forward_kinematics(const Rig& rig, std::span<const Mat3> local_rotations,
                                   const Vec3& root_translation);

/// Reverse pass of forward_kinematics: accumulates gradients w.r.t. the local
/// rotation matrices and the root translation.
void forward_kinematics_vjp(const Rig& rig, std::span<const Mat3> local_rotations,
                            const JointTransforms& transforms,
                            std::span<const Mat3> grad_rotations,
                            std::span<const Vec3> grad_translations,
                            std::span<Mat3> grad_local_rotations, Vec3* grad_root_translation);

/// Midpoint (1-to-4) subdivision. Child faces duplicate the parent's Gaussian
/// parameters; midpoint vertices average position and skinning weights.
Avatar subdivide(const Avatar& avatar);

struct Violation {
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate(const Avatar& avatar);
ValidationReport validate(const Rig& rig);

// Mesh helpers shared by the renderer, losses and metrics.

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

/// Unique undirected edges as sorted index pairs, in order of first appearance.
std::vector<std::pair<std::uint32_t, std::uint32_t>> unique_edges(std::span<const Face> faces);

/// Pairs of faces sharing an edge (a < b), ordered by edge first appearance.
std::vector<std::pair<std::uint32_t, std::uint32_t>> face_adjacency(std::span<const Face> faces);

/// Sorted one-ring neighbor lists.
std::vector<std::vector<std::uint32_t>> vertex_neighbors(std::size_t vertex_count,
                                                         std::span<const Face> faces);

/// One-rings of vertices off the mesh boundary; boundary vertices (on an edge
/// used by a single face) and isolated vertices get empty rings.
std::vector<std::vector<std::uint32_t>> interior_neighbors(std::size_t vertex_count,
                                                           std::span<const Face> faces);

}  // namespace gom
