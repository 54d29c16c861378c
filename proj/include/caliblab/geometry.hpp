#pragma once

// Projective primitives: image/board points, unit-normal lines and planar
// homographies estimated with the normalized DLT.

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "caliblab/error.hpp"

namespace caliblab {

/// Image point in pixels.
struct Point2 {
  double u = 0.0;
  double v = 0.0;

  Eigen::Vector2d vec() const { return {u, v}; }
  static Point2 from(const Eigen::Vector2d& p) { return {p.x(), p.y()}; }
  bool finite() const { return std::isfinite(u) && std::isfinite(v); }
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Point on the board plane (Z = 0), millimetres.
struct BoardPoint {
  double x = 0.0;
  double y = 0.0;

  Eigen::Vector2d vec() const { return {x, y}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const BoardPoint&, const BoardPoint&) = default;
};

struct Correspondence {
  BoardPoint board;
  Point2 image;
  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// Image line a*u + b*v + c = 0 with a^2 + b^2 = 1.
class Line2 {
 public:
  Line2() = default;

  /// Normalizes arbitrary coefficients; throws if (a, b) vanishes.
  static Line2 from_coefficients(double a, double b, double c) {
    const double n = std::hypot(a, b);
    if (!(n > 0.0) || !std::isfinite(n) || !std::isfinite(c)) {
      throw Error(ErrorCode::kDegenerateConfiguration,
                  "line normal must be finite and nonzero");
    }
    return Line2(a / n, b / n, c / n);
  }

  /// Line through `p` with direction `dir`.
  static Line2 through(const Point2& p, const Eigen::Vector2d& dir) {
    return from_coefficients(dir.y(), -dir.x(), dir.x() * p.v - dir.y() * p.u);
  }

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  Eigen::Vector3d coefficients() const { return {a_, b_, c_}; }

  double signed_distance(const Point2& p) const { return a_ * p.u + b_ * p.v + c_; }

  /// Sign-normalized copy (first nonzero of a, b positive) for comparisons.
  Line2 canonical() const {
    const bool flip = (a_ < 0.0) || (a_ == 0.0 && b_ < 0.0);
    return flip ? Line2(-a_, -b_, -c_) : *this;
  }

 private:
  Line2(double a, double b, double c) : a_(a), b_(b), c_(c) {}

  double a_ = 1.0;
  double b_ = 0.0;
  double c_ = 0.0;
};

/// Board-plane to image homography, stored with unit Frobenius norm and a
/// canonical sign (h9 >= 0; if h9 == 0, first nonzero of h7, h8 positive).
class Homography {
 public:
  static constexpr double kSingularDet = 1e-12;

  Homography() : m_(Eigen::Matrix3d::Identity() / std::sqrt(3.0)) {}

  /// Throws DegenerateConfiguration for non-finite or singular input.
  static Homography from_matrix(const Eigen::Matrix3d& m) {
    if (!m.allFinite()) {
      throw Error(ErrorCode::kDegenerateConfiguration, "homography has non-finite entries");
    }
    const double norm = m.norm();
    if (!(norm > 0.0)) {
      throw Error(ErrorCode::kDegenerateConfiguration, "zero homography");
    }
    Eigen::Matrix3d h = m / norm;
    double pivot = h(2, 2);
    if (pivot == 0.0) pivot = h(2, 0) != 0.0 ? h(2, 0) : h(2, 1);
    if (pivot < 0.0) h = -h;
    if (std::abs(h.determinant()) <= kSingularDet) {
      throw Error(ErrorCode::kDegenerateConfiguration, "singular homography");
    }
    return Homography(h);
  }

  static Homography from_entries(const std::array<double, 9>& h) {
    Eigen::Matrix3d m;
    m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
    return from_matrix(m);
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

  /// 1-based entry h1..h9 in row-major order.
  double h(int index) const { return m_((index - 1) / 3, (index - 1) % 3); }

  Homography inverse() const { return from_matrix(m_.inverse()); }

 private:
  explicit Homography(const Eigen::Matrix3d& m) : m_(m) {}

  Eigen::Matrix3d m_;
};

inline Point2 apply_homography(const Eigen::Matrix3d& h, double x, double y) {
  const double w = h(2, 0) * x + h(2, 1) * y + h(2, 2);
  if (std::abs(w) <= 1e-12) {
    throw Error(ErrorCode::kPointAtInfinity, "homography maps point to infinity");
  }
  return {(h(0, 0) * x + h(0, 1) * y + h(0, 2)) / w,
          (h(1, 0) * x + h(1, 1) * y + h(1, 2)) / w};
}

inline Point2 apply_homography(const Homography& h, const BoardPoint& p) {
  return apply_homography(h.matrix(), p.x, p.y);
}

namespace detail {

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
inline Eigen::Matrix3d isotropic_normalization(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

inline Eigen::Vector2d transform(const Eigen::Matrix3d& t, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = t * p.homogeneous();
  return q.hnormalized();
}

}  // namespace detail

/// Normalized DLT. Throws DegenerateConfiguration for fewer than four
/// points, duplicated or collinear board points, or a rank-deficient
/// design matrix (second-smallest / largest singular value below 1e-10).
inline Homography estimate_homography(std::span<const Correspondence> corrs) {
  const std::size_t n = corrs.size();
  if (n < 4) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "need at least 4 correspondences, got " + std::to_string(n));
  }
  std::vector<Eigen::Vector2d> board(n), image(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!corrs[i].board.finite() || !corrs[i].image.finite()) {
      throw Error(ErrorCode::kDegenerateConfiguration, "non-finite correspondence");
    }
    board[i] = corrs[i].board.vec();
    image[i] = corrs[i].image.vec();
  }
  {
    std::vector<std::pair<double, double>> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = {board[i].x(), board[i].y()};
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error(ErrorCode::kDegenerateConfiguration, "duplicated board points");
    }
  }

  const Eigen::Matrix3d tb = detail::isotropic_normalization(board);
  const Eigen::Matrix3d ti = detail::isotropic_normalization(image);

  // Pad to at least 9 rows so the SVD always exposes all nine singular values.
  const Eigen::Index rows = std::max<Eigen::Index>(2 * static_cast<Eigen::Index>(n), 9);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d p = detail::transform(tb, board[i]);
    const Eigen::Vector2d q = detail::transform(ti, image[i]);
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
    a.row(r + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y, -v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(7) / sv(0) < 1e-10) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "rank-deficient design matrix (collinear board points?)");
  }
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  return Homography::from_matrix(ti.inverse() * hn * tb);
}

/// Largest symmetric transfer error (px / mm mixed, as the two directions)
/// over the correspondences; the forward term is in pixels.
inline double max_transfer_error(const Homography& h, std::span<const Correspondence> corrs) {
  const Eigen::Matrix3d inv = h.matrix().inverse();
  double worst = 0.0;
  for (const auto& c : corrs) {
    const Point2 fwd = apply_homography(h, c.board);
    const Point2 back = apply_homography(inv, c.image.u, c.image.v);
    worst = std::max(worst, std::hypot(fwd.u - c.image.u, fwd.v - c.image.v));
    worst = std::max(worst, std::hypot(back.u - c.board.x, back.v - c.board.y));
  }
  return worst;
}

}  // namespace caliblab
