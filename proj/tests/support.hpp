#pragma once

// Shared fixtures for the test suites and the acceptance runner.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "caliblab/caliblab.hpp"

namespace caliblab::fixtures {

/// Camera looking at a board from `tilt_deg` off-normal, rolled by
/// `roll_deg`, board centre on the optical axis at distance `dist`.
inline Extrinsics tilted_pose(double tilt_deg, double roll_deg, double dist = 1000.0,
                              const Eigen::Vector3d& board_centre = Eigen::Vector3d::Zero()) {
  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(deg2rad(roll_deg), Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(deg2rad(tilt_deg), Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  return {rot, Eigen::Vector3d(0, 0, dist) - rot * board_centre};
}

/// Noise-free correspondences of a `cols` x `rows` grid with `step` spacing.
inline std::vector<Correspondence> grid_view(const Intrinsics& intr, const Extrinsics& extr,
                                             int cols = 9, int rows = 7, double step = 20.0) {
  std::vector<Correspondence> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const BoardPoint b{(c - (cols - 1) / 2.0) * step, (r - (rows - 1) / 2.0) * step};
      out.push_back({b, project(intr, extr, b)});
    }
  }
  return out;
}

/// Eight views rolled by 45 degrees at a fixed tilt, noise free.
inline std::vector<CalibrationView> roll_sweep(const Intrinsics& intr, double tilt_deg = 45.0,
                                               int n = 8) {
  std::vector<CalibrationView> views;
  for (int k = 0; k < n; ++k) {
    const Extrinsics e = tilted_pose(tilt_deg, 45.0 * k, 400.0);
    views.push_back(CalibrationView::make("v" + std::to_string(k), grid_view(intr, e)));
  }
  return views;
}

/// Small scene for fast end-to-end tests: 3 focal settings, all poses.
inline SceneConfig small_scene(std::uint64_t seed = 7) {
  SceneConfig c = default_scene_config();
  c.focal_settings = {c.focal_settings[0], c.focal_settings[3], c.focal_settings[6]};
  c.board_rows = 9;
  c.board_cols = 13;
  c.square_mm = 20.0;
  c.rng_seed = seed;
  return c;
}

/// Image direction of the board x axis at the board centre of `view`.
inline Eigen::Vector2d board_x_direction(const CalibrationView& view) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& c : view.correspondences) {
    xmin = std::min(xmin, c.board.x);
    xmax = std::max(xmax, c.board.x);
    ymin = std::min(ymin, c.board.y);
    ymax = std::max(ymax, c.board.y);
  }
  const double xc = (xmin + xmax) / 2, yc = (ymin + ymax) / 2, dx = (xmax - xmin) / 100;
  const Point2 a = apply_homography(view.homography.matrix(), xc - dx, yc);
  const Point2 b = apply_homography(view.homography.matrix(), xc + dx, yc);
  const Eigen::Vector2d d = b.vec() - a.vec();
  return d.normalized();
}

/// Half-board bias: corners on one side of the board's y mid-line are
/// shifted by `px` pixels along the image direction of the board x axis,
/// as a nonuniform illumination edge bias would do.
inline CalibrationView corrupt_half_board(const CalibrationView& view, bool far_half, double px) {
  const Eigen::Vector2d dir = board_x_direction(view);
  double ymin = 1e300, ymax = -1e300;
  for (const auto& c : view.correspondences) {
    ymin = std::min(ymin, c.board.y);
    ymax = std::max(ymax, c.board.y);
  }
  const double ymid = (ymin + ymax) / 2;
  auto corrs = view.correspondences;
  for (auto& c : corrs) {
    if ((c.board.y > ymid) == far_half && c.board.y != ymid) {
      c.image.u += px * dir.x();
      c.image.v += px * dir.y();
    }
  }
  return CalibrationView::make(view.id, std::move(corrs));
}

/// Central finite-difference Jacobian of the reprojection residuals.
inline Eigen::MatrixXd numeric_jacobian(const ReprojectionProblem& p, const Eigen::VectorXd& x) {
  Eigen::MatrixXd j(p.num_residuals(), p.num_params());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    j.col(k) = (p.residuals(xp) - p.residuals(xm)) / (2 * h);
  }
  return j;
}

/// Max over entries of |analytic - numeric| / max(1, |numeric|).
inline double jacobian_error(const ReprojectionProblem& p, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd a = p.jacobian(x);
  const Eigen::MatrixXd n = numeric_jacobian(p, x);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      worst = std::max(worst, std::abs(a(i, k) - n(i, k)) / std::max(1.0, std::abs(n(i, k))));
    }
  }
  return worst;
}

}  // namespace caliblab::fixtures
