#pragma once

#include <array>
#include <span>

#include "gom/model.hpp"

namespace gom {

/// Local-to-world affine frame of a face: x_world = axes * x_local + origin.
/// The first two columns are the semi-axes of the triangle's Steiner
/// circumellipse; the third is the normal scaled to length epsilon.
struct LocalFrame {
  Mat3 axes = Mat3::Zero();
  Vec3 origin = Vec3::Zero();
  double phase = 0.0;  // t0, the ellipse parameter of the first semi-axis
};

struct WorldGaussian {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
  Vec3 color = Vec3::Zero();
};

/// Throws DegenerateGeometryError when the triangle area is below kDegenerateArea.
LocalFrame steiner_frame(const Vec3& p1, const Vec3& p2, const Vec3& p3, double epsilon);

struct SteinerFrameGrad {
  std::array<Vec3, 3> vertices{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

/// Pulls d(loss)/d(axes) back to the three vertices.
SteinerFrameGrad steiner_frame_vjp(const Vec3& p1, const Vec3& p2, const Vec3& p3,
                                   double epsilon, const Mat3& grad_axes);

WorldGaussian face_gaussian(const Face& face, std::span<const Vec3> positions, double epsilon);

struct FaceGaussianGrad {
  std::array<Vec3, 3> vertices{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  Vec3 rotation = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec3 color_logit = Vec3::Zero();
};

FaceGaussianGrad face_gaussian_vjp(const Face& face, std::span<const Vec3> positions,
                                   double epsilon, const Vec3& grad_mean, const Mat3& grad_cov,
                                   const Vec3& grad_color);

}  // namespace gom
