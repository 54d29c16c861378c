#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace caliblab;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIoError;
}

PrincipalLine line_through(const Point2& p, double deg, std::string id) {
  const Eigen::Vector2d d(std::cos(deg2rad(deg)), std::sin(deg2rad(deg)));
  return {Line2::through(p, d), std::move(id), p, d};
}

}  // namespace

TEST(PrincipalLine, PassesThroughPrincipalPoint) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> tilt(20, 70), roll(0, 360), f(800, 12000), off(-300, 300);
  for (int i = 0; i < 200; ++i) {
    const Intrinsics intr{f(rng), {3000 + off(rng), 2000 + off(rng)}};
    const auto h = Homography::from_matrix(homography_matrix(intr, fixtures::tilted_pose(tilt(rng), roll(rng))));
    const PrincipalLine pl = principal_line(h, "v");
    EXPECT_LT(std::abs(pl.line.signed_distance(intr.pp)), 1e-9 * intr.f);
  }
}

TEST(PrincipalLine, PerpendicularToVanishingLine) {
  // The board's vanishing line is H^-T (0, 0, 1); the symmetry axis of the
  // tilted image is orthogonal to it.
  const Intrinsics intr{2000, {1024, 768}};
  for (double roll : {0.0, 30.0, 100.0, 222.0}) {
    const Eigen::Matrix3d m = homography_matrix(intr, fixtures::tilted_pose(50, roll));
    const Eigen::Vector3d van = m.inverse().transpose() * Eigen::Vector3d::UnitZ();
    const PrincipalLine pl = principal_line(Homography::from_matrix(m));
    const Eigen::Vector2d horizon_dir(-van.y(), van.x());
    EXPECT_LT(std::abs(horizon_dir.normalized().dot(pl.direction.normalized())), 1e-12);
  }
}

TEST(PrincipalLine, FrontoParallelIsDegenerate) {
  const Intrinsics intr{1800, {900, 600}};
  for (double roll : {0.0, 45.0, 170.0}) {
    const auto h = Homography::from_matrix(homography_matrix(intr, fixtures::tilted_pose(0, roll)));
    EXPECT_EQ(code_of([&] { principal_line(h); }), ErrorCode::kDegenerateView);
  }
}

TEST(EstimatePP, IntersectsTwoLines) {
  const Point2 pp{123.5, -45.25};
  const std::vector<PrincipalLine> lines = {line_through(pp, 10, "a"), line_through(pp, 80, "b")};
  const PPEstimate est = estimate_pp(lines);
  EXPECT_NEAR(est.pp.u, pp.u, 1e-9);
  EXPECT_NEAR(est.pp.v, pp.v, 1e-9);
  EXPECT_NEAR(est.rms_residual, 0.0, 1e-9);
}

TEST(EstimatePP, LeastSquaresOracle) {
  // Three lines forming a triangle: the estimate minimizes the sum of
  // squared distances, so the gradient of that sum vanishes there.
  const std::vector<PrincipalLine> lines = {line_through({0, 0}, 0, "a"), line_through({0, 0}, 90, "b"),
                                            line_through({10, 0}, 135, "c")};
  const PPEstimate est = estimate_pp(lines);
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  for (const auto& l : lines) grad += l.line.signed_distance(est.pp) * Eigen::Vector2d(l.line.a(), l.line.b());
  EXPECT_LT(grad.norm(), 1e-10);
  ASSERT_EQ(est.per_line_residual.size(), 3u);
}

TEST(EstimatePP, Errors) {
  const std::vector<PrincipalLine> one = {line_through({0, 0}, 0, "a")};
  EXPECT_EQ(code_of([&] { estimate_pp(one); }), ErrorCode::kTooFewLines);
  const std::vector<PrincipalLine> par = {line_through({0, 0}, 30, "a"), line_through({0, 5}, 30, "b"),
                                          line_through({0, 9}, 210, "c")};
  EXPECT_EQ(code_of([&] { estimate_pp(par); }), ErrorCode::kParallelLines);
}

TEST(Screening, FlagsTheOffsetLine) {
  const Point2 pp{500, 400};
  std::vector<PrincipalLine> lines;
  for (int k = 0; k < 8; ++k) lines.push_back(line_through(pp, 22.5 * k + 3, "v" + std::to_string(k)));
  lines[5] = line_through({pp.u + 20, pp.v}, 115.5, "v5");
  const LineScreening s = flag_outlier_lines(lines, kDefaultOutlierPx);
  ASSERT_EQ(s.outliers.size(), 1u);
  EXPECT_EQ(s.outliers[0], 5u);
  EXPECT_EQ(s.inliers.size(), 7u);
  std::vector<PrincipalLine> kept;
  for (auto i : s.inliers) kept.push_back(lines[i]);
  const PPEstimate est = estimate_pp(kept);
  EXPECT_NEAR(est.pp.u, pp.u, 1e-9);
  EXPECT_NEAR(est.pp.v, pp.v, 1e-9);
}

TEST(Screening, ConsistentLinesAreAllKept) {
  std::vector<PrincipalLine> lines;
  for (int k = 0; k < 6; ++k) lines.push_back(line_through({10, 20}, 30.0 * k + 1, "v"));
  const LineScreening s = flag_outlier_lines(lines, kDefaultOutlierPx);
  EXPECT_TRUE(s.outliers.empty());
  EXPECT_EQ(s.inliers.size(), 6u);
}

TEST(Screening, Errors) {
  std::vector<PrincipalLine> three;
  for (int k = 0; k < 3; ++k) three.push_back(line_through({0, 0}, 50.0 * k, "v"));
  EXPECT_EQ(code_of([&] { flag_outlier_lines(three, 5); }), ErrorCode::kTooFewLines);
  // Lines scattered far beyond the threshold around no common point.
  std::vector<PrincipalLine> chaos;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-500, 500), ang(0, 180);
  for (int k = 0; k < 8; ++k) chaos.push_back(line_through({pos(rng), pos(rng)}, ang(rng), "v"));
  EXPECT_EQ(code_of([&] { flag_outlier_lines(chaos, 0.5); }), ErrorCode::kAllFlagged);
}
