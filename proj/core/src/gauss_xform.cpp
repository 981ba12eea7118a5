#include "gom/gauss_xform.hpp"

#include <cmath>

#include "gom/error.hpp"

namespace gom {

namespace {

const double kInvSqrt3 = 1.0 / std::sqrt(3.0);

struct SteinerParts {
  Vec3 origin, u, v;
  double numer, denom, phase, c, s;
  bool isotropic;  // circumcircle: every phase is principal, t0 = 0
  Vec3 a1, a2, n;
};

SteinerParts steiner_parts(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  if (!(triangle_area(p1, p2, p3) >= kDegenerateArea)) {
    throw DegenerateGeometryError("triangle area below 1e-10 m^2");
  }
  SteinerParts s;
  s.origin = (p1 + p2 + p3) / 3.0;
  s.u = p3 - s.origin;
  s.v = (p2 - p1) * kInvSqrt3;
  s.numer = 2.0 * s.u.dot(s.v);
  s.denom = s.u.squaredNorm() - s.v.squaredNorm();
  s.isotropic = std::hypot(s.numer, s.denom) <= 1e-12 * (s.u.squaredNorm() + s.v.squaredNorm());
  s.phase = s.isotropic ? 0.0 : 0.5 * std::atan2(s.numer, s.denom);
  s.c = std::cos(s.phase);
  s.s = std::sin(s.phase);
  s.a1 = s.u * s.c + s.v * s.s;
  s.a2 = -s.u * s.s + s.v * s.c;
  s.n = s.a1.cross(s.a2);
  return s;
}

}  // namespace

LocalFrame steiner_frame(const Vec3& p1, const Vec3& p2, const Vec3& p3, double epsilon) {
  const SteinerParts s = steiner_parts(p1, p2, p3);
  LocalFrame f;
  f.origin = s.origin;
  f.phase = s.phase;
  f.axes.col(0) = s.a1;
  f.axes.col(1) = s.a2;
  f.axes.col(2) = epsilon * s.n.normalized();
  return f;
}

SteinerFrameGrad steiner_frame_vjp(const Vec3& p1, const Vec3& p2, const Vec3& p3,
                                   double epsilon, const Mat3& grad_axes) {
  const SteinerParts s = steiner_parts(p1, p2, p3);
  Vec3 g1 = grad_axes.col(0);
  Vec3 g2 = grad_axes.col(1);

  // a3 = eps * n / |n|, n = a1 x a2
  const double n_norm = s.n.norm();
  const Vec3 n_hat = s.n / n_norm;
  const Vec3 g3 = grad_axes.col(2);
  const Vec3 gn = epsilon / n_norm * (g3 - n_hat * n_hat.dot(g3));
  g1 += s.a2.cross(gn);
  g2 += gn.cross(s.a1);

  // a1 = u c + v s, a2 = -u s + v c, with t0 = atan2(N, D) / 2
  const double g_phase = g1.dot(s.a2) - g2.dot(s.a1);
  Vec3 gu = s.c * g1 - s.s * g2;
  Vec3 gv = s.s * g1 + s.c * g2;
  const double r2 = s.numer * s.numer + s.denom * s.denom;
  if (!s.isotropic) {
    const double k = 0.5 * g_phase / r2;
    // dN = 2 (v.du + u.dv), dD = 2 u.du - 2 v.dv
    gu += k * (s.denom * 2.0 * s.v - s.numer * 2.0 * s.u);
    gv += k * (s.denom * 2.0 * s.u + s.numer * 2.0 * s.v);
  }

  SteinerFrameGrad out;
  const Vec3 gu_share = gu / 3.0;
  out.vertices[0] = -gu_share - gv * kInvSqrt3;
  out.vertices[1] = -gu_share + gv * kInvSqrt3;
  out.vertices[2] = gu - gu_share;
  return out;
}

namespace {

const Vec3& vertex(std::span<const Vec3> positions, std::uint32_t i) {
  if (i >= positions.size()) throw ArgumentError("face vertex index out of range");
  return positions[i];
}

}  // namespace

WorldGaussian face_gaussian(const Face& face, std::span<const Vec3> positions, double epsilon) {
  const Vec3& p1 = vertex(positions, face.vertex_indices[0]);
  const Vec3& p2 = vertex(positions, face.vertex_indices[1]);
  const Vec3& p3 = vertex(positions, face.vertex_indices[2]);
  const LocalFrame frame = steiner_frame(p1, p2, p3, epsilon);
  const Mat3 rot = so3_exp(face.local_rotation);
  const Vec3 scale = face.local_log_scale.array().exp();
  const Mat3 m = frame.axes * rot * scale.asDiagonal();
  WorldGaussian g;
  g.mean = frame.origin;
  g.covariance = m * m.transpose();
  g.color = face.color_logit.unaryExpr([](double x) { return sigmoid(x); });
  return g;
}

FaceGaussianGrad face_gaussian_vjp(const Face& face, std::span<const Vec3> positions,
                                   double epsilon, const Vec3& grad_mean, const Mat3& grad_cov,
                                   const Vec3& grad_color) {
  const Vec3& p1 = vertex(positions, face.vertex_indices[0]);
  const Vec3& p2 = vertex(positions, face.vertex_indices[1]);
  const Vec3& p3 = vertex(positions, face.vertex_indices[2]);
  const LocalFrame frame = steiner_frame(p1, p2, p3, epsilon);
  const Mat3 rot = so3_exp(face.local_rotation);
  const Vec3 scale = face.local_log_scale.array().exp();
  const Mat3 ar = frame.axes * rot;
  const Mat3 m = ar * scale.asDiagonal();

  const Mat3 gm = (grad_cov + grad_cov.transpose()) * m;
  const Mat3 g_axes = gm * scale.asDiagonal() * rot.transpose();
  const Mat3 g_rot = frame.axes.transpose() * gm * scale.asDiagonal();
  const Vec3 g_scale = (ar.transpose() * gm).diagonal();

  FaceGaussianGrad out;
  const SteinerFrameGrad gf = steiner_frame_vjp(p1, p2, p3, epsilon, g_axes);
  for (int k = 0; k < 3; ++k) out.vertices[k] = gf.vertices[k] + grad_mean / 3.0;
  out.rotation = so3_exp_vjp(face.local_rotation, rot, g_rot);
  out.log_scale = g_scale.cwiseProduct(scale);
  for (int k = 0; k < 3; ++k) {
    const double c = sigmoid(face.color_logit[k]);
    out.color_logit[k] = grad_color[k] * c * (1.0 - c);
  }
  return out;
}

}  // namespace gom
