#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>

#include "caliblab/geometry.hpp"

namespace caliblab {

/// Pinhole intrinsics with zero skew and unit aspect ratio.
struct Intrinsics {
  double f = 1.0;
  Point2 pp;

  Eigen::Matrix3d k() const {
    Eigen::Matrix3d m;
    m << f, 0, pp.u, 0, f, pp.v, 0, 0, 1;
    return m;
  }
  Eigen::Matrix3d k_inverse() const {
    Eigen::Matrix3d m;
    m << 1 / f, 0, -pp.u / f, 0, 1 / f, -pp.v / f, 0, 0, 1;
    return m;
  }
  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Board-to-camera rigid transform: X_cam = rot * X_board + t (mm).
struct Extrinsics {
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d(0, 0, 1);

  bool operator==(const Extrinsics& o) const { return rot == o.rot && t == o.t; }
};

inline double orthonormality_error(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

/// Nearest rotation in the Frobenius sense (orthogonal polar factor).
inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

inline Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-300) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

inline Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

/// Homography H = K [r1 r2 t] of a board viewed with (intr, extr).
inline Eigen::Matrix3d homography_matrix(const Intrinsics& intr, const Extrinsics& extr) {
  Eigen::Matrix3d m;
  m.col(0) = extr.rot.col(0);
  m.col(1) = extr.rot.col(1);
  m.col(2) = extr.t;
  return intr.k() * m;
}

inline Point2 project(const Intrinsics& intr, const Extrinsics& extr, const BoardPoint& p) {
  const Eigen::Vector3d xc = extr.rot.col(0) * p.x + extr.rot.col(1) * p.y + extr.t;
  return {intr.f * xc.x() / xc.z() + intr.pp.u, intr.f * xc.y() / xc.z() + intr.pp.v};
}

}  // namespace caliblab
