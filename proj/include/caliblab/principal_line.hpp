#pragma once

// Principal lines: the image-plane symmetry axis of a tilted planar target.
//
// For H ~ K [r1 r2 t] with square pixels and zero skew, the plane through the
// camera centre spanned by the optical axis and the board normal meets the
// image in a line through the principal point. Two image points on it are
// computable from H alone:
//   * the vanishing point of the board's line of steepest ascent,
//     H (h7, h8, 0)^T = K (r31 r1 + r32 r2), and
//   * the direction of the image-plane part of the board normal,
//     (w1, w2) from w = h_a x h_b ~ K^-T r3.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "caliblab/error.hpp"
#include "caliblab/geometry.hpp"

namespace caliblab {

struct PrincipalLine {
  Line2 line;
  std::string source_view;
  Point2 anchor;
  Eigen::Vector2d direction = Eigen::Vector2d::UnitX();
};

struct PPEstimate {
  Point2 pp;
  double rms_residual = 0.0;
  std::vector<double> per_line_residual;
  double condition = 1.0;
};

/// Anchor farther than this (px) from the image origin counts as "at
/// infinity", i.e. the view shows no usable perspective.
inline constexpr double kMaxAnchorDistancePx = 1e10;
inline constexpr double kMaxNormalCondition = 1e8;
inline constexpr double kDefaultOutlierPx = 5.0;

inline PrincipalLine principal_line(const Homography& hom, std::string view_id = {}) {
  const Eigen::Matrix3d& h = hom.matrix();
  const Eigen::Vector3d ha = h.col(0);
  const Eigen::Vector3d hb = h.col(1);
  const double h7 = h(2, 0), h8 = h(2, 1);

  const Eigen::Vector3d vd = h7 * ha + h8 * hb;
  const double z = h7 * h7 + h8 * h8;
  if (!(z > 0.0) || vd.head<2>().norm() > kMaxAnchorDistancePx * z) {
    throw Error(ErrorCode::kDegenerateView,
                "board is fronto-parallel (no perspective) in view '" + view_id + "'");
  }
  const Eigen::Vector3d w = ha.cross(hb);
  const Eigen::Vector2d dir = w.head<2>();
  if (!(dir.norm() > 1e-12 * w.norm())) {
    throw Error(ErrorCode::kAmbiguousDirection,
                "principal line direction undefined in view '" + view_id + "'");
  }

  PrincipalLine pl;
  pl.anchor = Point2::from(vd.head<2>() / z);
  pl.direction = dir.normalized();
  pl.line = Line2::through(pl.anchor, pl.direction);
  pl.source_view = std::move(view_id);
  return pl;
}

/// Least-squares intersection of unit-normal lines.
inline PPEstimate estimate_pp(std::span<const PrincipalLine> lines) {
  if (lines.size() < 2) {
    throw Error(ErrorCode::kTooFewLines,
                "need at least 2 lines, got " + std::to_string(lines.size()));
  }
  Eigen::Matrix2d normal = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (const auto& pl : lines) {
    const Eigen::Vector2d n(pl.line.a(), pl.line.b());
    normal += n * n.transpose();
    rhs -= pl.line.c() * n;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(normal);
  const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(1);
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(condition < kMaxNormalCondition)) {
    throw Error(ErrorCode::kParallelLines, "principal lines are (nearly) parallel");
  }

  PPEstimate est;
  est.pp = Point2::from(normal.ldlt().solve(rhs));
  est.condition = condition;
  est.per_line_residual.reserve(lines.size());
  double sq = 0.0;
  for (const auto& pl : lines) {
    const double r = pl.line.signed_distance(est.pp);
    est.per_line_residual.push_back(r);
    sq += r * r;
  }
  est.rms_residual = std::sqrt(sq / static_cast<double>(lines.size()));
  return est;
}

struct LineScreening {
  std::vector<std::size_t> inliers;   // indices into the input, ascending
  std::vector<std::size_t> outliers;  // in the order they were flagged
};

namespace detail {

inline std::vector<PrincipalLine> select(std::span<const PrincipalLine> lines,
                                         const std::vector<std::size_t>& idx,
                                         std::size_t skip = std::numeric_limits<std::size_t>::max()) {
  std::vector<PrincipalLine> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i != skip) out.push_back(lines[i]);
  }
  return out;
}

}  // namespace detail

/// Leave-one-out screening. Each round estimates the PP without each active
/// line, flags the single line farthest from its leave-one-out PP if that
/// distance exceeds `threshold_px`, and repeats until nothing is flagged.
/// A flag is only accepted when it does not raise the inlier RMS residual.
inline LineScreening flag_outlier_lines(std::span<const PrincipalLine> lines,
                                        double threshold_px = kDefaultOutlierPx) {
  const std::size_t n = lines.size();
  if (n < 4) {
    throw Error(ErrorCode::kTooFewLines,
                "leave-one-out screening needs at least 4 lines, got " + std::to_string(n));
  }
  LineScreening result;
  for (std::size_t i = 0; i < n; ++i) result.inliers.push_back(i);

  while (true) {
    if (result.inliers.size() < 4) {
      const auto rest = detail::select(lines, result.inliers);
      const PPEstimate est = estimate_pp(rest);
      for (double r : est.per_line_residual) {
        if (std::abs(r) > threshold_px) {
          throw Error(ErrorCode::kAllFlagged,
                      "screening would flag more than n-3 of " + std::to_string(n) + " lines");
        }
      }
      break;
    }
    double worst = -1.0;
    std::size_t worst_pos = 0;
    for (std::size_t k = 0; k < result.inliers.size(); ++k) {
      const std::size_t idx = result.inliers[k];
      const auto others = detail::select(lines, result.inliers, idx);
      double d = 0.0;
      try {
        d = std::abs(lines[idx].line.signed_distance(estimate_pp(others).pp));
      } catch (const Error& e) {
        // Without this line the rest are parallel: it cannot be judged.
        if (e.code() != ErrorCode::kParallelLines) throw;
        continue;
      }
      if (d > worst) {
        worst = d;
        worst_pos = k;
      }
    }
    if (!(worst > threshold_px)) break;

    const double rms_before = estimate_pp(detail::select(lines, result.inliers)).rms_residual;
    const std::size_t flagged = result.inliers[worst_pos];
    const double rms_after =
        estimate_pp(detail::select(lines, result.inliers, flagged)).rms_residual;
    if (rms_after > rms_before) break;
    result.inliers.erase(result.inliers.begin() + static_cast<std::ptrdiff_t>(worst_pos));
    result.outliers.push_back(flagged);
  }
  return result;
}

}  // namespace caliblab
