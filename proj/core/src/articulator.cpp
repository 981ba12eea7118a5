#include "gom/articulator.hpp"

#include <cmath>

#include "gom/error.hpp"
#include "gom/parallel.hpp"

namespace gom {

int deformer_input_dim(std::size_t joint_count, const EncodingConfig& cfg) {
  return cfg.output_dim() + 3 * static_cast<int>(joint_count > 0 ? joint_count - 1 : 0);
}

int refiner_input_dim(std::size_t joint_count) { return 9 * static_cast<int>(joint_count); }

Networks make_networks(std::size_t joint_count, std::uint64_t seed) {
  Networks nets;
  const int j = static_cast<int>(joint_count);
  nets.deformer = Mlp::create(deformer_input_dim(joint_count, nets.deformer_encoding),
                              kDeformerWidth, kDeformerLayers, 3, seed);
  nets.refiner = Mlp::create(refiner_input_dim(joint_count), kRefinerWidth, kRefinerLayers, 3 * j,
                             seed + 1);
  nets.shading = Mlp::create(nets.shading_encoding.output_dim(), kShadingWidth, kShadingLayers, 1,
                             seed + 2);
  return nets;
}

Eigen::VectorXd deformer_condition(std::span<const Mat3> local_rotations) {
  const std::size_t n = local_rotations.empty() ? 0 : local_rotations.size() - 1;
  Eigen::VectorXd cond(3 * n);
  for (std::size_t j = 0; j < n; ++j) cond.segment<3>(3 * j) = so3_log(local_rotations[j + 1]);
  return cond;
}

namespace {

std::vector<Mat3> local_matrices(const Pose& pose) {
  std::vector<Mat3> out(pose.joint_count());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = so3_exp(pose.local_rotations[j]);
  return out;
}

void check_pose(const Rig& rig, const Pose& pose) {
  if (pose.joint_count() != rig.joint_count()) {
    throw ArgumentError("pose has " + std::to_string(pose.joint_count()) + " joints, rig has " +
                        std::to_string(rig.joint_count()));
  }
  if (!pose.root_translation.allFinite()) throw ArgumentError("pose root translation not finite");
  for (const auto& r : pose.local_rotations) {
    if (!r.allFinite()) throw ArgumentError("pose rotation not finite");
  }
}

Eigen::MatrixXd refiner_input(std::span<const Mat3> local) {
  Eigen::MatrixXd x(9 * local.size(), 1);
  for (std::size_t j = 0; j < local.size(); ++j) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) x(9 * j + 3 * r + c, 0) = local[j](r, c);
    }
  }
  return x;
}

Eigen::MatrixXd deformer_input(std::span<const Vec3> positions, const Eigen::VectorXd& cond,
                               const EncodingConfig& cfg) {
  const int enc = cfg.output_dim();
  Eigen::MatrixXd x(enc + cond.size(), positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    pos_encode_into(positions[i], cfg, x.col(i).data());
    x.col(i).tail(cond.size()) = cond;
  }
  return x;
}

// Blended rigid transform of one vertex, normalized by the weight sum.
void blend(const Eigen::VectorXd& w, const JointTransforms& joints, Mat3& m, Vec3& t, double& sum) {
  m.setZero();
  t.setZero();
  sum = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double wj = w[j];
    if (wj == 0.0) continue;
    m.noalias() += wj * joints.rotations[j];
    t.noalias() += wj * joints.translations[j];
    sum += wj;
  }
}

}  // namespace

std::vector<Vec3> nr_deform(std::span<const Vec3> positions, const Pose& pose, const Mlp& params,
                            const EncodingConfig& cfg) {
  const int expected = deformer_input_dim(pose.joint_count(), cfg);
  if (params.empty()) return std::vector<Vec3>(positions.size(), Vec3::Zero());
  if (params.input_dim() != expected || params.output_dim() != 3) {
    throw ArgumentError("nr_deform: network expects " + std::to_string(params.input_dim()) +
                        " inputs and " + std::to_string(params.output_dim()) +
                        " outputs; need " + std::to_string(expected) + " -> 3");
  }
  const std::vector<Mat3> local = local_matrices(pose);
  const Eigen::MatrixXd out =
      params.forward(deformer_input(positions, deformer_condition(local), cfg));
  std::vector<Vec3> offsets(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) offsets[i] = out.col(i);
  return offsets;
}

Pose refine_pose(const Pose& estimate, const Rig& rig, const Mlp& params) {
  check_pose(rig, estimate);
  const std::size_t n = rig.joint_count();
  if (params.input_dim() != refiner_input_dim(n) || params.output_dim() != static_cast<int>(3 * n)) {
    throw ArgumentError("refine_pose: refiner shape does not match the rig joint count");
  }
  const std::vector<Mat3> local = local_matrices(estimate);
  const Eigen::MatrixXd xi = params.forward(refiner_input(local));
  Pose out = estimate;
  for (std::size_t j = 0; j < n; ++j) {
    out.local_rotations[j] = so3_log(local[j] * so3_exp(xi.col(0).segment<3>(3 * j)));
  }
  return out;
}

Vec3 lbs(const Vec3& point, const Eigen::VectorXd& weights, const JointTransforms& joints) {
  if (static_cast<std::size_t>(weights.size()) != joints.size()) {
    throw ArgumentError("lbs: weight count differs from joint count");
  }
  Mat3 m;
  Vec3 t;
  double sum;
  blend(weights, joints, m, t, sum);
  if (!(sum > 0.0)) throw DomainError("lbs: skinning weight sum must be positive");
  return (m * point + t) / sum;
}

ArticulationGrad ArticulationGrad::zeros(const Avatar& avatar, const Networks& nets) {
  ArticulationGrad g;
  g.positions.assign(avatar.vertices.size(), Vec3::Zero());
  g.pose_correction.assign(avatar.rig.joint_count(), Vec3::Zero());
  g.deformer = nets.deformer.zeros_like();
  g.refiner = nets.refiner.zeros_like();
  return g;
}

std::vector<Vec3> articulate(const Avatar& avatar, const Pose& pose, const Networks& nets,
                             bool refine) {
  ArticulateOptions options;
  options.refine = refine;
  return articulate(avatar, pose, nets, options, nullptr);
}

std::vector<Vec3> articulate(const Avatar& avatar, const Pose& pose, const Networks& nets,
                             const ArticulateOptions& options, ArticulationTape* tape) {
  const Rig& rig = avatar.rig;
  check_pose(rig, pose);
  const std::size_t n_joints = rig.joint_count();
  const std::size_t n_verts = avatar.vertices.size();

  ArticulationTape local_tape;
  ArticulationTape& t = tape ? *tape : local_tape;
  t = ArticulationTape{};

  t.estimated_local = local_matrices(pose);
  t.local = t.estimated_local;
  t.correction.assign(n_joints, Vec3::Zero());
  if (options.refine) {
    if (nets.refiner.empty()) throw ArgumentError("articulate: refinement requested without a refiner");
    if (nets.refiner.input_dim() != refiner_input_dim(n_joints) ||
        nets.refiner.output_dim() != static_cast<int>(3 * n_joints)) {
      throw ArgumentError("articulate: refiner shape does not match the rig joint count");
    }
    t.refined = true;
    t.refiner_input = refiner_input(t.estimated_local);
    const Eigen::MatrixXd xi = nets.refiner.forward(t.refiner_input, t.refiner_tape);
    for (std::size_t j = 0; j < n_joints; ++j) {
      t.correction[j] = xi.col(0).segment<3>(3 * j);
      if (!options.correction_offset.empty()) t.correction[j] += options.correction_offset.at(j);
      t.local[j] = t.estimated_local[j] * so3_exp(t.correction[j]);
    }
  }

  std::vector<Vec3> canonical = avatar.positions();
  t.deformed_positions = canonical;
  if (!nets.deformer.empty()) {
    const int expected = deformer_input_dim(n_joints, nets.deformer_encoding);
    if (nets.deformer.input_dim() != expected || nets.deformer.output_dim() != 3) {
      throw ArgumentError("articulate: deformer expects " +
                          std::to_string(nets.deformer.input_dim()) + " inputs, need " +
                          std::to_string(expected));
    }
    t.deformed = true;
    const Eigen::VectorXd cond = deformer_condition(t.local);
    t.local_log.resize(n_joints > 0 ? n_joints - 1 : 0);
    for (std::size_t j = 0; j < t.local_log.size(); ++j) t.local_log[j] = cond.segment<3>(3 * j);
    t.deformer_input = deformer_input(canonical, cond, nets.deformer_encoding);
    const Eigen::MatrixXd offsets = nets.deformer.forward(t.deformer_input, t.deformer_tape);
    for (std::size_t i = 0; i < n_verts; ++i) t.deformed_positions[i] += offsets.col(i);
  }

  t.joints = forward_kinematics(rig, t.local, pose.root_translation);

  std::vector<Vec3> observed(n_verts);
  t.weight_sums.resize(n_verts);
  parallel_chunks(n_verts, [&](std::size_t, std::size_t begin, std::size_t end) {
    Mat3 m;
    Vec3 tr;
    double sum;
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::VectorXd& w = avatar.vertices[i].weights;
      if (static_cast<std::size_t>(w.size()) != n_joints) {
        throw ArgumentError("articulate: vertex " + std::to_string(i) + " weight count");
      }
      blend(w, t.joints, m, tr, sum);
      if (!(sum > 0.0)) {
        throw DomainError("articulate: vertex " + std::to_string(i) + " has zero weight sum");
      }
      t.weight_sums[i] = sum;
      observed[i] = (m * t.deformed_positions[i] + tr) / sum;
    }
  });
  return observed;
}

void articulate_backward(const Avatar& avatar, const Networks& nets, const ArticulationTape& tape,
                         std::span<const Vec3> grad_observed, ArticulationGrad& grad) {
  const Rig& rig = avatar.rig;
  const std::size_t n_joints = rig.joint_count();
  const std::size_t n_verts = avatar.vertices.size();
  if (grad_observed.size() != n_verts) throw ArgumentError("articulate_backward: gradient size");

  // Skinning.
  std::vector<Vec3> g_deformed(n_verts);
  std::vector<Mat3> g_rot(n_joints, Mat3::Zero());
  std::vector<Vec3> g_trans(n_joints, Vec3::Zero());
  for (std::size_t i = 0; i < n_verts; ++i) {
    const Eigen::VectorXd& w = avatar.vertices[i].weights;
    const Vec3 g = grad_observed[i] / tape.weight_sums[i];
    const Vec3& p = tape.deformed_positions[i];
    Vec3 gp = Vec3::Zero();
    for (std::size_t j = 0; j < n_joints; ++j) {
      const double wj = w[j];
      if (wj == 0.0) continue;
      gp.noalias() += wj * (tape.joints.rotations[j].transpose() * g);
      g_rot[j].noalias() += wj * g * p.transpose();
      g_trans[j].noalias() += wj * g;
    }
    g_deformed[i] = gp;
  }

  std::vector<Mat3> g_local(n_joints, Mat3::Zero());
  forward_kinematics_vjp(rig, tape.local, tape.joints, g_rot, g_trans, g_local, nullptr);

  // Non-rigid deformation.
  std::vector<Vec3> g_local_log(tape.local_log.size(), Vec3::Zero());
  for (std::size_t i = 0; i < n_verts; ++i) grad.positions[i] += g_deformed[i];
  if (tape.deformed) {
    Eigen::MatrixXd g_out(3, n_verts);
    for (std::size_t i = 0; i < n_verts; ++i) g_out.col(i) = g_deformed[i];
    const Eigen::MatrixXd g_in = nets.deformer.backward(tape.deformer_tape, g_out, grad.deformer);
    const EncodingConfig& cfg = nets.deformer_encoding;
    const int enc = cfg.output_dim();
    for (std::size_t i = 0; i < n_verts; ++i) {
      grad.positions[i] += pos_encode_vjp(avatar.vertices[i].position, cfg, g_in.col(i).data());
      for (std::size_t j = 0; j < g_local_log.size(); ++j) {
        g_local_log[j] += g_in.col(i).segment<3>(enc + 3 * j);
      }
    }
  }

  // Pose refinement.
  if (tape.refined) {
    Eigen::MatrixXd g_xi(3 * n_joints, 1);
    for (std::size_t j = 0; j < n_joints; ++j) {
      const Vec3& xi = tape.correction[j];
      const Mat3 exp_xi = so3_exp(xi);
      Vec3 g = so3_exp_vjp(xi, exp_xi, tape.estimated_local[j].transpose() * g_local[j]);
      if (j >= 1 && !g_local_log.empty()) {
        const Vec3 g_delta = so3_log_right_vjp(tape.local_log[j - 1], g_local_log[j - 1]);
        g += so3_right_jacobian(xi).transpose() * g_delta;
      }
      grad.pose_correction[j] += g;
      g_xi.block<3, 1>(3 * j, 0) = g;
    }
    nets.refiner.backward(tape.refiner_tape, g_xi, grad.refiner);
  }
}

}  // namespace gom
