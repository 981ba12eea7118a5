#include "gom/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "gom/error.hpp"

namespace gom {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Local rotation expressed in rest space: conjugation by the joint's rest frame.
Mat3 world_local(const Rig& rig, std::size_t j, const Mat3& local) {
  const Mat3& rest = rig.rest_rotations[j];
  return rest * local * rest.transpose();
}

void check_sizes(const Rig& rig, std::size_t n) {
  if (n != rig.joint_count()) {
    throw ArgumentError("pose has " + std::to_string(n) + " joints, rig has " +
                        std::to_string(rig.joint_count()));
  }
  if (rig.rest_rotations.size() != rig.joint_count() ||
      rig.rest_translations.size() != rig.joint_count()) {
    throw ArgumentError("rig arrays have inconsistent lengths");
  }
}

}  // namespace

Pose Pose::identity(std::size_t joint_count) {
  Pose pose;
  pose.local_rotations.assign(joint_count, Vec3::Zero());
  return pose;
}

std::vector<Vec3> Avatar::positions() const {
  std::vector<Vec3> out;
  out.reserve(vertices.size());
  for (const auto& v : vertices) out.push_back(v.position);
  return out;
}

std::vector<int> joint_order(const Rig& rig) {
  const std::size_t n = rig.joint_count();
  if (n == 0) return {};
  if (rig.parents[0] != -1) throw ArgumentError("joint 0 must be the root");
  std::vector<std::vector<int>> children(n);
  for (std::size_t j = 1; j < n; ++j) {
    const int p = rig.parents[j];
    if (p < 0 || static_cast<std::size_t>(p) >= n || static_cast<std::size_t>(p) == j) {
      throw ArgumentError("joint " + std::to_string(j) + " has invalid parent " +
                          std::to_string(p));
    }
    children[p].push_back(static_cast<int>(j));
  }
  std::vector<int> order{0};
  order.reserve(n);
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (int c : children[order[i]]) order.push_back(c);
  }
  if (order.size() != n) throw ArgumentError("rig parents contain a cycle");
  return order;
}

JointTransforms forward_kinematics(const Rig& rig, const Pose& pose) {
  check_sizes(rig, pose.joint_count());
  std::vector<Mat3> local(pose.joint_count());
  for (std::size_t j = 0; j < local.size(); ++j) local[j] = so3_exp(pose.local_rotations[j]);
  return forward_kinematics(rig, local, pose.root_translation);
}

JointTransforms forward_kinematics(const Rig& rig, std::span<const Mat3> local_rotations,
                                   const Vec3& root_translation) {
  check_sizes(rig, local_rotations.size());
  const std::size_t n = rig.joint_count();
  JointTransforms out;
  out.rotations.resize(n);
  out.translations.resize(n);
  for (int j : joint_order(rig)) {
    const Mat3 rw = world_local(rig, j, local_rotations[j]);
    const Vec3& c = rig.rest_translations[j];
    const Vec3 lever = c - rw * c;
    if (j == 0) {
      out.rotations[0] = rw;
      out.translations[0] = lever + root_translation;
    } else {
      const int p = rig.parents[j];
      out.rotations[j] = out.rotations[p] * rw;
      out.translations[j] = out.rotations[p] * lever + out.translations[p];
    }
  }
  return out;
}

void forward_kinematics_vjp(const Rig& rig, std::span<const Mat3> local_rotations,
                            const JointTransforms& transforms,
                            std::span<const Mat3> grad_rotations,
                            std::span<const Vec3> grad_translations,
                            std::span<Mat3> grad_local_rotations, Vec3* grad_root_translation) {
  const std::size_t n = rig.joint_count();
  check_sizes(rig, local_rotations.size());
  if (grad_rotations.size() != n || grad_translations.size() != n ||
      grad_local_rotations.size() != n) {
    throw ArgumentError("forward_kinematics_vjp: gradient arrays must have one entry per joint");
  }
  std::vector<Mat3> g_rot(grad_rotations.begin(), grad_rotations.end());
  std::vector<Vec3> g_trans(grad_translations.begin(), grad_translations.end());
  const std::vector<int> order = joint_order(rig);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    const Mat3& rest = rig.rest_rotations[j];
    const Mat3 rw = world_local(rig, j, local_rotations[j]);
    const Vec3& c = rig.rest_translations[j];
    Mat3 g_rw;
    if (j == 0) {
      g_rw = g_rot[0] - g_trans[0] * c.transpose();
      if (grad_root_translation) *grad_root_translation += g_trans[0];
    } else {
      const int p = rig.parents[j];
      const Mat3& rp = transforms.rotations[p];
      g_rw = rp.transpose() * (g_rot[j] - g_trans[j] * c.transpose());
      g_rot[p] += g_rot[j] * rw.transpose() + g_trans[j] * (c - rw * c).transpose();
      g_trans[p] += g_trans[j];
    }
    grad_local_rotations[j] += rest.transpose() * g_rw * rest;
  }
}

Avatar subdivide(const Avatar& avatar) {
  Avatar out;
  out.rig = avatar.rig;
  out.epsilon = avatar.epsilon;
  out.subdivision_level = avatar.subdivision_level + 1;
  out.vertices = avatar.vertices;
  out.faces.reserve(avatar.faces.size() * 4);

  std::unordered_map<std::uint64_t, std::uint32_t> midpoint;
  midpoint.reserve(avatar.faces.size() * 2);
  auto mid = [&](std::uint32_t a, std::uint32_t b) {
    const auto [it, inserted] =
        midpoint.try_emplace(edge_key(a, b), static_cast<std::uint32_t>(out.vertices.size()));
    if (inserted) {
      const Vertex& va = avatar.vertices[std::min(a, b)];
      const Vertex& vb = avatar.vertices[std::max(a, b)];
      Vertex m;
      m.position = 0.5 * (va.position + vb.position);
      m.weights = 0.5 * (va.weights + vb.weights);
      out.vertices.push_back(std::move(m));
    }
    return it->second;
  };

  for (const Face& f : avatar.faces) {
    const auto [a, b, c] = f.vertex_indices;
    const std::uint32_t ab = mid(a, b);
    const std::uint32_t bc = mid(b, c);
    const std::uint32_t ca = mid(c, a);
    for (const std::array<std::uint32_t, 3> idx :
         {std::array{a, ab, ca}, std::array{ab, b, bc}, std::array{ca, bc, c},
          std::array{ab, bc, ca}}) {
      Face child = f;
      child.vertex_indices = idx;
      out.faces.push_back(child);
    }
  }
  return out;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].message;
  }
  return os.str();
}

ValidationReport validate(const Rig& rig) {
  ValidationReport report;
  auto add = [&](std::string msg) { report.violations.push_back({std::move(msg)}); };
  const std::size_t n = rig.joint_count();
  if (n == 0) add("rig has no joints");
  if (rig.rest_rotations.size() != n) add("rig rest rotation count differs from joint count");
  if (rig.rest_translations.size() != n) add("rig rest translation count differs from joint count");
  if (rig.names.size() != n) add("rig name count differs from joint count");
  if (n == 0) return report;
  try {
    joint_order(rig);
  } catch (const ArgumentError& e) {
    add(std::string("rig hierarchy: ") + e.what());
  }
  for (std::size_t j = 0; j < std::min(n, rig.rest_rotations.size()); ++j) {
    if (!is_rotation(rig.rest_rotations[j], 1e-6)) {
      add("joint " + std::to_string(j) + ": rest rotation is not a rotation");
    }
  }
  for (std::size_t j = 0; j < std::min(n, rig.rest_translations.size()); ++j) {
    if (!rig.rest_translations[j].allFinite()) {
      add("joint " + std::to_string(j) + ": rest translation not finite");
    }
  }
  return report;
}

ValidationReport validate(const Avatar& avatar) {
  ValidationReport report = validate(avatar.rig);
  auto add = [&](std::string msg) { report.violations.push_back({std::move(msg)}); };
  const std::size_t j_count = avatar.rig.joint_count();
  const std::size_t v_count = avatar.vertices.size();

  if (!std::isfinite(avatar.epsilon) || avatar.epsilon <= 0.0) add("epsilon must be positive");

  for (std::size_t i = 0; i < v_count; ++i) {
    const Vertex& v = avatar.vertices[i];
    const std::string who = "vertex " + std::to_string(i);
    if (!v.position.allFinite()) add(who + ": position not finite");
    if (static_cast<std::size_t>(v.weights.size()) != j_count) {
      add(who + ": weight vector length " + std::to_string(v.weights.size()) +
          " differs from joint count " + std::to_string(j_count));
      continue;
    }
    if (!v.weights.allFinite()) {
      add(who + ": weights not finite");
    } else if ((v.weights.array() < 0.0).any()) {
      add(who + ": negative skinning weight");
    } else if (!(v.weights.sum() > 0.0)) {
      add(who + ": weight sum > 0 violated");
    }
  }

  for (std::size_t f = 0; f < avatar.faces.size(); ++f) {
    const Face& face = avatar.faces[f];
    const std::string who = "face " + std::to_string(f);
    const auto [a, b, c] = face.vertex_indices;
    if (a == b || b == c || a == c) {
      add(who + ": repeated vertex index");
      continue;
    }
    if (a >= v_count || b >= v_count || c >= v_count) {
      add(who + ": vertex index out of range");
      continue;
    }
    if (!face.local_rotation.allFinite() || !face.local_log_scale.allFinite() ||
        !face.color_logit.allFinite()) {
      add(who + ": non-finite attribute");
      continue;
    }
    const double area = triangle_area(avatar.vertices[a].position, avatar.vertices[b].position,
                                      avatar.vertices[c].position);
    if (!(area >= kDegenerateArea)) add(who + ": degenerate (area below 1e-10 m^2)");
  }
  return report;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> unique_edges(std::span<const Face> faces) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::unordered_map<std::uint64_t, std::size_t> seen;
  seen.reserve(faces.size() * 2);
  for (const Face& f : faces) {
    for (int k = 0; k < 3; ++k) {
      std::uint32_t a = f.vertex_indices[k];
      std::uint32_t b = f.vertex_indices[(k + 1) % 3];
      if (seen.try_emplace(edge_key(a, b), edges.size()).second) {
        edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  return edges;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> face_adjacency(std::span<const Face> faces) {
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> by_edge;
  std::vector<std::uint64_t> edge_order;
  for (std::uint32_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const std::uint64_t key =
          edge_key(faces[f].vertex_indices[k], faces[f].vertex_indices[(k + 1) % 3]);
      auto& list = by_edge[key];
      if (list.empty()) edge_order.push_back(key);
      list.push_back(f);
    }
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::uint64_t key : edge_order) {
    const auto& list = by_edge[key];
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t k = i + 1; k < list.size(); ++k) {
        pairs.emplace_back(std::min(list[i], list[k]), std::max(list[i], list[k]));
      }
    }
  }
  return pairs;
}

std::vector<std::vector<std::uint32_t>> vertex_neighbors(std::size_t vertex_count,
                                                         std::span<const Face> faces) {
  std::vector<std::vector<std::uint32_t>> ring(vertex_count);
  for (const Face& f : faces) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = f.vertex_indices[k];
      const std::uint32_t b = f.vertex_indices[(k + 1) % 3];
      ring[a].push_back(b);
      ring[b].push_back(a);
    }
  }
  for (auto& r : ring) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return ring;
}

std::vector<std::vector<std::uint32_t>> interior_neighbors(std::size_t vertex_count,
                                                           std::span<const Face> faces) {
  auto rings = vertex_neighbors(vertex_count, faces);
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> uses;
  for (const Face& f : faces) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = f.vertex_indices[k], b = f.vertex_indices[(k + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [edge, count] : uses) {
    if (count == 1) {
      rings[edge.first].clear();
      rings[edge.second].clear();
    }
  }
  return rings;
}

}  // namespace gom
