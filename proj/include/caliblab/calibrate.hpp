#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caliblab/camera.hpp"
#include "caliblab/error.hpp"
#include "caliblab/geometry.hpp"
#include "caliblab/principal_line.hpp"

namespace caliblab {

struct CalibrationView {
  std::string id;
  std::vector<Correspondence> correspondences;
  Homography homography;
  std::optional<PrincipalLine> principal_line;
  double transfer_error = 0.0;

  /// Estimates the homography and, when the view has perspective, its PL.
  static CalibrationView make(std::string id, std::vector<Correspondence> corrs) {
    if (corrs.size() < 4) {
      throw Error(ErrorCode::kDegenerateConfiguration,
                  "view '" + id + "' has fewer than 4 correspondences");
    }
    CalibrationView view;
    view.id = std::move(id);
    view.correspondences = std::move(corrs);
    view.homography = estimate_homography(view.correspondences);
    view.transfer_error = max_transfer_error(view.homography, view.correspondences);
    try {
      view.principal_line = caliblab::principal_line(view.homography, view.id);
    } catch (const Error&) {
      view.principal_line.reset();
    }
    return view;
  }
};

enum class Method { kGeometric, kAlgebraic, kRefined };

constexpr std::string_view method_name(Method m) {
  switch (m) {
    case Method::kGeometric: return "geometric";
    case Method::kAlgebraic: return "algebraic";
    case Method::kRefined: return "refined";
  }
  return "unknown";
}

struct CalibrationResult {
  Method method = Method::kGeometric;
  Intrinsics intrinsics;
  std::vector<std::string> view_ids;  // accepted views, aligned with per_view
  std::vector<Extrinsics> per_view;
  std::optional<PPEstimate> pp_estimate;
  std::vector<double> focal_samples;
  double rmse = 0.0;
  std::vector<std::string> flags;
  // Algebraic path only: how far the unconstrained conic is from the
  // zero-skew, unit-aspect model (skew in px, aspect = fx / fy).
  double skew_residual = 0.0;
  double aspect_residual = 1.0;
  bool converged = true;
  int iterations = 0;
};

struct GeometricOptions {
  double outlier_px = kDefaultOutlierPx;
  /// Focal constraints whose denominator is below this fraction of
  /// h7^2 + h8^2 are skipped.
  double focal_denominator_ratio = 1e-2;
};

/// Closed-form focal lengths from one homography with known PP: one from
/// r1 . r2 = 0 and one from |r1| = |r2|. Returns 0, 1 or 2 values.
inline std::vector<double> focal_from_homography(const Homography& hom, const Point2& pp,
                                                 double denominator_ratio = 1e-2) {
  const Eigen::Matrix3d& h = hom.matrix();
  const double h7 = h(2, 0), h8 = h(2, 1);
  const double a1 = h(0, 0) - pp.u * h7, a2 = h(1, 0) - pp.v * h7;
  const double b1 = h(0, 1) - pp.u * h8, b2 = h(1, 1) - pp.v * h8;
  const double persp = h7 * h7 + h8 * h8;

  std::vector<double> out;
  if (!(persp > 0.0)) return out;
  const double den1 = h7 * h8;
  if (std::abs(den1) > denominator_ratio * persp) {
    const double f2 = -(a1 * b1 + a2 * b2) / den1;
    if (f2 > 0.0 && std::isfinite(f2)) out.push_back(std::sqrt(f2));
  }
  const double den2 = h8 * h8 - h7 * h7;
  if (std::abs(den2) > denominator_ratio * persp) {
    const double f2 = (a1 * a1 + a2 * a2 - b1 * b1 - b2 * b2) / den2;
    if (f2 > 0.0 && std::isfinite(f2)) out.push_back(std::sqrt(f2));
  }
  return out;
}

/// Pose from a homography and known intrinsics; the rotation is projected
/// onto SO(3) and the overall sign chosen so the board is in front.
inline Extrinsics extrinsics_from_homography(const Homography& hom, const Intrinsics& intr) {
  if (!(intr.f > 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "focal length must be positive");
  }
  const Eigen::Matrix3d m = intr.k_inverse() * hom.matrix();
  double lambda = 0.5 * (m.col(0).norm() + m.col(1).norm());
  if (m(2, 2) < 0.0) lambda = -lambda;
  const Eigen::Vector3d r1 = m.col(0) / lambda;
  const Eigen::Vector3d r2 = m.col(1) / lambda;
  Eigen::Matrix3d r;
  r << r1, r2, r1.cross(r2);

  Extrinsics e;
  e.rot = nearest_rotation(r);
  e.t = m.col(2) / lambda;
  if (!(e.t.z() > 1e-12 * e.t.norm())) {
    throw Error(ErrorCode::kBehindCamera, "board is not in front of the camera");
  }
  return e;
}

/// Sum of squared reprojection distances and corner count for one view.
inline std::pair<double, std::size_t> reprojection_sq_sum(const Intrinsics& intr,
                                                          const Extrinsics& extr,
                                                          const CalibrationView& view) {
  double sq = 0.0;
  for (const auto& c : view.correspondences) {
    const Point2 p = project(intr, extr, c.board);
    const double du = p.u - c.image.u, dv = p.v - c.image.v;
    sq += du * du + dv * dv;
  }
  return {sq, view.correspondences.size()};
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline const CalibrationView* find_view(std::span<const CalibrationView> views,
                                        const std::string& id) {
  for (const auto& v : views) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

/// Fills per_view and rmse for the accepted views in result.view_ids.
inline void finish_with_extrinsics(CalibrationResult& result,
                                   std::span<const CalibrationView> views) {
  double sq = 0.0;
  std::size_t count = 0;
  result.per_view.clear();
  for (const auto& id : result.view_ids) {
    const CalibrationView& view = *find_view(views, id);
    result.per_view.push_back(extrinsics_from_homography(view.homography, result.intrinsics));
    const auto [s, n] = reprojection_sq_sum(result.intrinsics, result.per_view.back(), view);
    sq += s;
    count += n;
  }
  result.rmse = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
}

}  // namespace detail

/// Principal-line calibration: PLs -> leave-one-out screening -> PP as their
/// least-squares intersection -> median of per-view focal constraints ->
/// per-view extrinsics.
inline CalibrationResult calibrate_geometric(std::span<const CalibrationView> views,
                                             const GeometricOptions& opts = {}) {
  if (views.size() < 2) {
    throw Error(ErrorCode::kInsufficientViews,
                "geometric calibration needs at least 2 views, got " +
                    std::to_string(views.size()));
  }
  CalibrationResult result;
  result.method = Method::kGeometric;

  std::vector<PrincipalLine> lines;
  std::vector<std::size_t> line_view;
  for (std::size_t i = 0; i < views.size(); ++i) {
    std::optional<PrincipalLine> pl = views[i].principal_line;
    if (!pl) {
      try {
        pl = principal_line(views[i].homography, views[i].id);
      } catch (const Error&) {
      }
    }
    if (pl) {
      lines.push_back(*pl);
      line_view.push_back(i);
    } else {
      result.flags.push_back(views[i].id);
    }
  }
  if (lines.size() < 2) {
    throw Error(ErrorCode::kInsufficientViews, "fewer than 2 views have a principal line");
  }

  std::vector<std::size_t> accepted(lines.size());
  for (std::size_t i = 0; i < accepted.size(); ++i) accepted[i] = i;
  if (lines.size() >= 4) {
    const LineScreening screen = flag_outlier_lines(lines, opts.outlier_px);
    accepted = screen.inliers;
    for (std::size_t k : screen.outliers) result.flags.push_back(views[line_view[k]].id);
  }
  std::vector<PrincipalLine> kept;
  for (std::size_t k : accepted) kept.push_back(lines[k]);
  result.pp_estimate = estimate_pp(kept);
  result.intrinsics.pp = result.pp_estimate->pp;

  for (std::size_t k : accepted) {
    const CalibrationView& view = views[line_view[k]];
    for (double f : focal_from_homography(view.homography, result.intrinsics.pp,
                                          opts.focal_denominator_ratio)) {
      result.focal_samples.push_back(f);
    }
    result.view_ids.push_back(view.id);
  }
  if (result.focal_samples.empty()) {
    throw Error(ErrorCode::kNoFocalEstimate, "every focal constraint is degenerate");
  }
  result.intrinsics.f = detail::median(result.focal_samples);
  detail::finish_with_extrinsics(result, views);
  return result;
}

/// Zhang-style closed form on the image of the absolute conic
/// b = (B11, B12, B22, B13, B23, B33), two constraints per view.
inline CalibrationResult calibrate_algebraic(std::span<const CalibrationView> views) {
  if (views.size() < 3) {
    throw Error(ErrorCode::kInsufficientViews,
                "algebraic calibration needs at least 3 views, got " +
                    std::to_string(views.size()));
  }
  // Condition pixel coordinates so the conic entries are of similar size.
  std::vector<Eigen::Vector2d> all_image;
  for (const auto& v : views) {
    for (const auto& c : v.correspondences) all_image.push_back(c.image.vec());
  }
  const Eigen::Matrix3d cond = detail::isotropic_normalization(all_image);
  const double s = cond(0, 0);
  const double cx = -cond(0, 2) / s, cy = -cond(1, 2) / s;

  auto vij = [](const Eigen::Matrix3d& h, int i, int j) {
    Eigen::Matrix<double, 1, 6> r;
    r << h(0, i) * h(0, j), h(0, i) * h(1, j) + h(1, i) * h(0, j), h(1, i) * h(1, j),
        h(2, i) * h(0, j) + h(0, i) * h(2, j), h(2, i) * h(1, j) + h(1, i) * h(2, j),
        h(2, i) * h(2, j);
    return r;
  };
  const auto rows = static_cast<Eigen::Index>(std::max<std::size_t>(2 * views.size(), 6));
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(rows, 6);
  for (std::size_t k = 0; k < views.size(); ++k) {
    Eigen::Matrix3d h = cond * views[k].homography.matrix();
    h /= h.norm();
    Eigen::Matrix<double, 1, 6> r1 = vij(h, 0, 1);
    Eigen::Matrix<double, 1, 6> r2 = vij(h, 0, 0) - vij(h, 1, 1);
    if (r1.norm() > 0) r1.normalize();
    if (r2.norm() > 0) r2.normalize();
    sys.row(static_cast<Eigen::Index>(2 * k)) = r1;
    sys.row(static_cast<Eigen::Index>(2 * k + 1)) = r2;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(4) / sv(0) < 1e-12) {
    throw Error(ErrorCode::kDegenerateSystem,
                "conic constraint system is rank deficient (views lack distinct rotations)");
  }
  Eigen::VectorXd b = svd.matrixV().col(5);
  if (b(0) < 0.0) b = -b;
  const double b11 = b(0), b12 = b(1), b22 = b(2), b13 = b(3), b23 = b(4), b33 = b(5);
  const double det2 = b11 * b22 - b12 * b12;
  if (!(b11 > 0.0) || !(det2 > 0.0)) {
    throw Error(ErrorCode::kDegenerateSystem, "recovered conic is not positive definite");
  }
  const double v0 = (b12 * b13 - b11 * b23) / det2;
  const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
  if (!(lambda / b11 > 0.0)) {
    throw Error(ErrorCode::kDegenerateSystem, "recovered conic is not positive definite");
  }
  const double alpha = std::sqrt(lambda / b11);
  const double beta = std::sqrt(lambda * b11 / det2);
  const double gamma = -b12 * alpha * alpha * beta / lambda;
  const double u0 = gamma * v0 / beta - b13 * alpha * alpha / lambda;

  CalibrationResult result;
  result.method = Method::kAlgebraic;
  result.intrinsics.f = std::sqrt(alpha * beta) / s;
  result.intrinsics.pp = {u0 / s + cx, v0 / s + cy};
  result.skew_residual = gamma / s;
  result.aspect_residual = alpha / beta;
  for (const auto& v : views) {
    for (double f : focal_from_homography(v.homography, result.intrinsics.pp)) {
      result.focal_samples.push_back(f);
    }
    result.view_ids.push_back(v.id);
  }
  detail::finish_with_extrinsics(result, views);
  return result;
}

}  // namespace caliblab
