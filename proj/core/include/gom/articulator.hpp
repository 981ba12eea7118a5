#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gom/mlp.hpp"
#include "gom/model.hpp"

namespace gom {

// Network architectures: number of linear layers and hidden width.
inline constexpr int kDeformerLayers = 7;
inline constexpr int kDeformerWidth = 128;
inline constexpr int kRefinerLayers = 5;
inline constexpr int kRefinerWidth = 256;
inline constexpr int kShadingLayers = 4;
inline constexpr int kShadingWidth = 128;

/// Learned networks of an avatar. Any of them may be empty (absent).
struct Networks {
  Mlp deformer;  // [encoded position, non-root pose] -> vertex offset
  Mlp refiner;   // flattened local rotation matrices -> per-joint axis-angle correction
  Mlp shading;   // encoded camera-space normal -> log shading factor
  EncodingConfig deformer_encoding{6, true};
  EncodingConfig shading_encoding{4, true};

  bool operator==(const Networks& o) const {
    return deformer == o.deformer && refiner == o.refiner && shading == o.shading;
  }
};

int deformer_input_dim(std::size_t joint_count, const EncodingConfig& cfg);
int refiner_input_dim(std::size_t joint_count);

/// Default architectures with zero-initialized output layers, so every network
/// starts as the identity correction.
Networks make_networks(std::size_t joint_count, std::uint64_t seed);

/// Pose conditioning of the deformer: axis-angle of every non-root joint.
Eigen::VectorXd deformer_condition(std::span<const Mat3> local_rotations);

/// Per-vertex offsets predicted by the deformer (caller adds them).
std::vector<Vec3> nr_deform(std::span<const Vec3> positions, const Pose& pose, const Mlp& params,
                            const EncodingConfig& cfg);

Pose refine_pose(const Pose& estimate, const Rig& rig, const Mlp& params);

/// Normalized linear blend skinning of one point.
Vec3 lbs(const Vec3& point, const Eigen::VectorXd& weights, const JointTransforms& joints);

struct ArticulateOptions {
  bool refine = false;
  /// Added to the refiner output before it is applied; empty means none.
  std::vector<Vec3> correction_offset;
};

struct ArticulationTape {
  std::vector<Mat3> estimated_local;
  std::vector<Mat3> local;  // after refinement
  std::vector<Vec3> correction;
  bool refined = false;
  Eigen::MatrixXd refiner_input;
  MlpTape refiner_tape;
  std::vector<Vec3> local_log;
  bool deformed = false;
  Eigen::MatrixXd deformer_input;
  MlpTape deformer_tape;
  std::vector<Vec3> deformed_positions;
  std::vector<double> weight_sums;
  JointTransforms joints;
};

struct ArticulationGrad {
  std::vector<Vec3> positions;        // canonical vertex positions
  std::vector<Vec3> pose_correction;  // refiner output
  Mlp deformer;
  Mlp refiner;

  static ArticulationGrad zeros(const Avatar& avatar, const Networks& nets);
};

/// Observation-space vertex positions: optional pose refinement, non-rigid
/// deformation, forward kinematics and skinning. Face attributes are untouched.
std::vector<Vec3> articulate(const Avatar& avatar, const Pose& pose, const Networks& nets,
                             bool refine);

std::vector<Vec3> articulate(const Avatar& avatar, const Pose& pose, const Networks& nets,
                             const ArticulateOptions& options, ArticulationTape* tape);

/// Accumulates into `grad` given d(loss)/d(observation-space positions).
void articulate_backward(const Avatar& avatar, const Networks& nets, const ArticulationTape& tape,
                         std::span<const Vec3> grad_observed, ArticulationGrad& grad);

}  // namespace gom
