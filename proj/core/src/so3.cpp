#include "gom/so3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gom {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 k = skew(omega);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 so3_log(const Mat3& r) {
  const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::atan2(0.5 * vee.norm(), cos_theta);
  if (theta < kSmallAngle) {
    return 0.5 * vee;
  }
  if (std::numbers::pi - theta < 1e-3) {
    // The skew part vanishes near pi; read the axis from the symmetric part
    // (R + R^T) / 2 = cos(theta) I + (1 - cos(theta)) n n^T.
    const Mat3 outer = (0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
    int col = 0;
    outer.diagonal().maxCoeff(&col);
    Vec3 axis = outer.col(col).normalized();
    if (axis.dot(vee) < 0.0) axis = -axis;
    return theta * axis;
  }
  return theta / (2.0 * std::sin(theta)) * vee;
}

Mat3 so3_right_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 k = skew(omega);
  if (theta < 1e-5) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() - (1.0 - std::cos(theta)) / t2 * k +
         (theta - std::sin(theta)) / (t2 * theta) * k * k;
}

Mat3 so3_right_jacobian_inverse(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 k = skew(omega);
  if (theta < 1e-5) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 12.0) * k * k;
  }
  const double c = 1.0 / (theta * theta) -
                   (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() + 0.5 * k + c * k * k;
}

Vec3 so3_exp_vjp(const Vec3& omega, const Mat3& rotation, const Mat3& grad_rotation) {
  const Mat3 a = rotation.transpose() * grad_rotation;
  const Vec3 u(a(2, 1) - a(1, 2), a(0, 2) - a(2, 0), a(1, 0) - a(0, 1));
  return so3_right_jacobian(omega).transpose() * u;
}

Vec3 so3_log_right_vjp(const Vec3& log_rotation, const Vec3& grad_log) {
  return so3_right_jacobian_inverse(log_rotation).transpose() * grad_log;
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace gom
