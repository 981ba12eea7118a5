#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace gom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

Mat3 skew(const Vec3& v);

/// Rotation matrix of an axis-angle vector (Rodrigues, series near zero).
Mat3 so3_exp(const Vec3& omega);

/// Inverse of so3_exp with angle in [0, pi].
Vec3 so3_log(const Mat3& rotation);

/// Right Jacobian J_r such that exp(w + dw) ~= exp(w) exp(J_r(w) dw).
Mat3 so3_right_jacobian(const Vec3& omega);
Mat3 so3_right_jacobian_inverse(const Vec3& omega);

/// Pulls a gradient w.r.t. R = exp(omega) back to omega.
Vec3 so3_exp_vjp(const Vec3& omega, const Mat3& rotation, const Mat3& grad_rotation);

/// Pulls a gradient w.r.t. log(R) back to a right perturbation delta, R' = R exp(delta).
Vec3 so3_log_right_vjp(const Vec3& log_rotation, const Vec3& grad_log);

bool is_rotation(const Mat3& r, double tol = 1e-6);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace gom
