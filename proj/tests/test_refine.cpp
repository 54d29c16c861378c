#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace caliblab;

namespace {

struct Config {
  Intrinsics intr;
  std::vector<CalibrationView> views;
  std::vector<Extrinsics> poses;
};

Config random_config(std::mt19937_64& rng, int n_views) {
  std::uniform_real_distribution<double> f(800, 9000), off(-200, 200), tilt(20, 65), roll(0, 360);
  Config c;
  c.intr = {f(rng), {2000 + off(rng), 1300 + off(rng)}};
  for (int k = 0; k < n_views; ++k) {
    const Extrinsics e = fixtures::tilted_pose(tilt(rng), roll(rng), 300 + std::abs(off(rng)));
    c.poses.push_back(e);
    c.views.push_back(CalibrationView::make("v" + std::to_string(k), fixtures::grid_view(c.intr, e, 6, 5)));
  }
  return c;
}

std::vector<const CalibrationView*> pointers(const std::vector<CalibrationView>& v) {
  std::vector<const CalibrationView*> out;
  for (const auto& x : v) out.push_back(&x);
  return out;
}

}  // namespace

TEST(RotatePointJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 50; ++i) {
    Eigen::Vector3d w(u(rng), u(rng), u(rng));
    if (i == 0) w.setZero();
    if (i == 1) w = Eigen::Vector3d(1e-12, -2e-12, 0);
    const Eigen::Vector3d p(u(rng) * 100, u(rng) * 100, u(rng) * 10);
    const Eigen::Matrix3d j = rotate_point_jacobian(w, p);
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6;
      Eigen::Vector3d wp = w, wm = w;
      wp(k) += h;
      wm(k) -= h;
      const Eigen::Vector3d num = (rotation_from_axis_angle(wp) * p - rotation_from_axis_angle(wm) * p) / (2 * h);
      EXPECT_LT((num - j.col(k)).norm(), 1e-6 * std::max(1.0, num.norm()));
    }
  }
}

TEST(ReprojectionProblem, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Config c = random_config(rng, 3);
    for (bool free_intr : {true, false}) {
      const ReprojectionProblem p(pointers(c.views), c.intr, free_intr);
      Eigen::VectorXd x = p.pack(c.intr, c.poses);
      // Move off the optimum so residuals are nonzero.
      std::normal_distribution<double> n(0, 1);
      for (Eigen::Index k = 0; k < x.size(); ++k) x(k) += 1e-3 * n(rng) * std::max(1.0, std::abs(x(k)));
      EXPECT_LT(fixtures::jacobian_error(p, x), 1e-4);
    }
  }
}

TEST(ReprojectionProblem, PackUnpackRoundTrip) {
  std::mt19937_64 rng(2);
  const Config c = random_config(rng, 2);
  const ReprojectionProblem p(pointers(c.views), c.intr, true);
  const Eigen::VectorXd x = p.pack(c.intr, c.poses);
  EXPECT_EQ(x.size(), 15);
  EXPECT_DOUBLE_EQ(p.intrinsics(x).f, c.intr.f);
  const auto poses = p.poses(x);
  for (std::size_t k = 0; k < poses.size(); ++k) {
    EXPECT_LT((poses[k].rot - c.poses[k].rot).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((poses[k].t - c.poses[k].t).norm(), 1e-9);
  }
  EXPECT_LT(p.residuals(x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LevenbergMarquardt, ConvergesFromPerturbedStart) {
  std::mt19937_64 rng(17);
  const Config c = random_config(rng, 5);
  const ReprojectionProblem p(pointers(c.views), c.intr, true);
  Eigen::VectorXd x0 = p.pack({c.intr.f * 1.02, {c.intr.pp.u + 15, c.intr.pp.v - 10}}, c.poses);
  const auto rep = levenberg_marquardt(p, x0);
  EXPECT_TRUE(rep.converged);
  EXPECT_LT(rep.final_cost, 1e-12 * rep.initial_cost + 1e-14);
  for (std::size_t i = 1; i < rep.accepted_costs.size(); ++i) {
    EXPECT_LE(rep.accepted_costs[i], rep.accepted_costs[i - 1]);
  }
  const Intrinsics got = p.intrinsics(rep.x);
  EXPECT_NEAR(got.f, c.intr.f, 1e-6 * c.intr.f);
  EXPECT_NEAR(got.pp.u, c.intr.pp.u, 1e-5);
  EXPECT_NEAR(got.pp.v, c.intr.pp.v, 1e-5);
}

TEST(Refine, ReducesAlgebraicErrorOnNoisyData) {
  SceneConfig sc = fixtures::small_scene(3);
  sc.noise_sigma_px = 0.5;
  sc.poses = {PoseLabel::kDown};
  const Dataset ds = generate_dataset(sc);
  for (const auto& cell : ds.cells) {
    const CalibrationResult a = calibrate_algebraic(cell.views);
    const CalibrationResult r = refine(a, cell.views);
    EXPECT_EQ(r.method, Method::kRefined);
    EXPECT_LE(r.rmse, a.rmse);
    EXPECT_TRUE(r.converged);
    for (const auto& e : r.per_view) EXPECT_LT(orthonormality_error(e.rot), 1e-9);
  }
}

TEST(FitPose, RecoversTruthWithKnownIntrinsics) {
  std::mt19937_64 rng(5);
  const Config c = random_config(rng, 1);
  const Extrinsics e = fit_pose(c.views[0], c.intr);
  EXPECT_LT((e.rot - c.poses[0].rot).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((e.t - c.poses[0].t).norm(), 1e-6);
}
