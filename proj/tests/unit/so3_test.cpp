#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gom/so3.hpp"
#include "scenes.hpp"

namespace gom {
namespace {

using std::numbers::pi;

TEST(So3, ExpQuarterTurnAboutZ) {
  const Mat3 r = so3_exp(Vec3(0.0, 0.0, pi / 2));
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_TRUE(r.isApprox(expected, 1e-12));
}

TEST(So3, ExpOfZeroIsIdentity) { EXPECT_EQ(so3_exp(Vec3::Zero()), Mat3::Identity()); }

TEST(So3, LogInvertsExp) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    Vec3 w(u(rng), u(rng), u(rng));
    w *= (pi - 1e-3) * std::abs(u(rng)) / w.norm();
    EXPECT_LT((so3_log(so3_exp(w)) - w).norm(), 1e-9) << w.transpose();
  }
  for (double tiny : {1e-12, 1e-9, 1e-6}) {
    const Vec3 w(tiny, -2 * tiny, 0.5 * tiny);
    EXPECT_LT((so3_log(so3_exp(w)) - w).norm(), 1e-15);
  }
}

TEST(So3, LogNearPi) {
  const Vec3 axis = Vec3(1.0, 2.0, -0.5).normalized();
  for (double a : {pi, pi - 1e-7, pi - 1e-4}) {
    const Vec3 w = so3_log(so3_exp(a * axis));
    EXPECT_NEAR(w.norm(), a, 1e-7);
    EXPECT_TRUE(so3_exp(w).isApprox(so3_exp(a * axis), 1e-9));
  }
}

TEST(So3, RightJacobianMatchesDefinition) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 50; ++i) {
    const Vec3 w(u(rng), u(rng), u(rng)), d(u(rng), u(rng), u(rng));
    const double h = 1e-7;
    // log(exp(w)^T exp(w + h d)) / h ~= J_r(w) d
    const Vec3 lhs = so3_log(so3_exp(w).transpose() * so3_exp(w + h * d)) / h;
    EXPECT_LT((lhs - so3_right_jacobian(w) * d).norm(), 1e-5);
    EXPECT_TRUE((so3_right_jacobian(w) * so3_right_jacobian_inverse(w)).isApprox(Mat3::Identity(), 1e-10));
  }
}

TEST(So3, ExpVjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 30; ++i) {
    const Vec3 w(u(rng), u(rng), u(rng));
    Mat3 g;
    for (int k = 0; k < 9; ++k) g.data()[k] = u(rng);
    const Vec3 a = so3_exp_vjp(w, so3_exp(w), g);
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = 1e-6;
      const double fd = ((so3_exp(w + e) - so3_exp(w - e)).cwiseProduct(g)).sum() / 2e-6;
      EXPECT_NEAR(a[k], fd, 1e-7);
    }
  }
}

TEST(So3, LogRightVjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 30; ++i) {
    const Vec3 w(u(rng), u(rng), u(rng)), g(u(rng), u(rng), u(rng));
    const Vec3 a = so3_log_right_vjp(w, g);
    const Mat3 r = so3_exp(w);
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = 1e-6;
      const double fd = g.dot(so3_log(r * so3_exp(e)) - so3_log(r * so3_exp(-e))) / 2e-6;
      EXPECT_NEAR(a[k], fd, 1e-7);
    }
  }
}

TEST(So3, IsRotation) {
  std::mt19937_64 rng(7);
  EXPECT_TRUE(is_rotation(testing::random_rotation(rng)));
  EXPECT_FALSE(is_rotation(-Mat3::Identity()));
  EXPECT_FALSE(is_rotation(2.0 * Mat3::Identity()));
}

}  // namespace
}  // namespace gom
