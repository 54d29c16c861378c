#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace caliblab;

namespace {

Eigen::Matrix3d random_homography(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> tilt(20, 70), roll(0, 360), f(800, 3000), pp(-100, 100);
  const Intrinsics intr{f(rng), {1000 + pp(rng), 700 + pp(rng)}};
  return homography_matrix(intr, fixtures::tilted_pose(tilt(rng), roll(rng)));
}

}  // namespace

TEST(Line2, ThroughPointHasZeroDistanceThere) {
  const Line2 l = Line2::through({3, 4}, Eigen::Vector2d(1, 2));
  EXPECT_NEAR(l.signed_distance({3, 4}), 0.0, 1e-12);
  EXPECT_NEAR(l.signed_distance({4, 6}), 0.0, 1e-12);
  // Unit normal: a point one unit off along the normal is at distance 1.
  const Eigen::Vector2d n(l.a(), l.b());
  EXPECT_NEAR(n.norm(), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(l.signed_distance({3 + n.x(), 4 + n.y()})), 1.0, 1e-12);
}

TEST(Line2, DegenerateCoefficientsThrow) {
  EXPECT_THROW(Line2::from_coefficients(0, 0, 1), Error);
}

TEST(Homography, CanonicalFormIsScaleAndSignInvariant) {
  Eigen::Matrix3d m;
  m << 2, 0.1, 5, -0.2, 1.5, 3, 1e-3, 2e-3, 1;
  const Homography a = Homography::from_matrix(m);
  const Homography b = Homography::from_matrix(-7.5 * m);
  EXPECT_NEAR(a.matrix().norm(), 1.0, 1e-15);
  EXPECT_GE(a.h(9), 0.0);
  EXPECT_LT((a.matrix() - b.matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Homography, SingularMatrixRejected) {
  Eigen::Matrix3d m;
  m << 1, 2, 3, 2, 4, 6, 0, 0, 1;
  try {
    Homography::from_matrix(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateConfiguration);
  }
}

TEST(Homography, PointAtInfinity) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(2, 0) = 1.0;
  m(2, 2) = 0.0;
  try {
    apply_homography(m, 0.0, 5.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPointAtInfinity);
  }
}

TEST(EstimateHomography, RecoversExactHomographies) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Matrix3d truth = random_homography(rng);
    std::vector<Correspondence> corrs;
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double x = (i - 2.5) * 30, y = (j - 2) * 30;
        corrs.push_back({{x, y}, apply_homography(truth, x, y)});
      }
    }
    const Homography h = estimate_homography(corrs);
    const Homography t = Homography::from_matrix(truth);
    EXPECT_LT((h.matrix() - t.matrix()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(max_transfer_error(h, corrs), 1e-7);
  }
}

TEST(EstimateHomography, MinimalFourPoints) {
  const Eigen::Matrix3d truth = Homography::from_entries({1, 0.2, 10, -0.1, 1.2, 20, 1e-4, 3e-4, 1}).matrix();
  std::vector<Correspondence> corrs;
  for (auto [x, y] : {std::pair{0.0, 0.0}, {100.0, 0.0}, {100.0, 80.0}, {0.0, 80.0}}) {
    corrs.push_back({{x, y}, apply_homography(truth, x, y)});
  }
  EXPECT_LT(max_transfer_error(estimate_homography(corrs), corrs), 1e-8);
}

TEST(EstimateHomography, DegenerateInputs) {
  auto expect_code = [](const std::vector<Correspondence>& c) {
    try {
      estimate_homography(c);
      ADD_FAILURE() << "no throw";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDegenerateConfiguration);
    }
  };
  expect_code({{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}});
  // Collinear board points.
  std::vector<Correspondence> line;
  for (int i = 0; i < 6; ++i) line.push_back({{double(i), 2.0 * i}, {double(i), 3.0 * i}});
  expect_code(line);
  // Duplicate board point.
  std::vector<Correspondence> dup = {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}},
                                     {{1, 1}, {1, 1}}, {{1, 1}, {1, 1}}};
  expect_code(dup);
  // Non-finite coordinate.
  std::vector<Correspondence> nan = {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}},
                                     {{1, 1}, {std::nan(""), 1}}};
  expect_code(nan);
}

TEST(Rotation, NearestRotationIsOrthonormal) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 100; ++i) {
    Eigen::Matrix3d m;
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = n(rng);
    const Eigen::Matrix3d r = nearest_rotation(m);
    EXPECT_LT(orthonormality_error(r), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(Rotation, AxisAngleRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d w(u(rng) / 2, u(rng) / 2, u(rng) / 2);
    const Eigen::Matrix3d r = rotation_from_axis_angle(w);
    EXPECT_LT((axis_angle_from_rotation(r) - w).norm(), 1e-12);
    // Oracle: Rodrigues' formula written out.
    const double t = w.norm();
    const Eigen::Matrix3d k = skew(w / t);
    const Eigen::Matrix3d rod = Eigen::Matrix3d::Identity() + std::sin(t) * k + (1 - std::cos(t)) * k * k;
    EXPECT_LT((rod - r).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Camera, HomographyMatchesProjection) {
  const Intrinsics intr{1500, {980, 710}};
  const Extrinsics e = fixtures::tilted_pose(40, 77, 600);
  const Eigen::Matrix3d h = homography_matrix(intr, e);
  for (double x : {-50.0, 0.0, 35.0}) {
    for (double y : {-20.0, 10.0}) {
      const Point2 a = apply_homography(h, x, y);
      const Point2 b = project(intr, e, {x, y});
      EXPECT_NEAR(a.u, b.u, 1e-9);
      EXPECT_NEAR(a.v, b.v, 1e-9);
    }
  }
}
