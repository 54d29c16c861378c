#pragma once

// Levenberg-Marquardt reprojection refinement over (f, u0, v0) and per-view
// poses (axis-angle + translation), or over poses alone with frozen
// intrinsics.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "caliblab/calibrate.hpp"
#include "caliblab/camera.hpp"

namespace caliblab {

struct RefineOptions {
  bool optimize_intrinsics = true;
  int max_iters = 100;
  double initial_lambda = 1e-3;
  double rel_tolerance = 1e-12;
};

/// d(R p)/d(w_i) for R = exp([w]x); closed form from Gallego & Yezzi.
inline Eigen::Matrix3d rotate_point_jacobian(const Eigen::Vector3d& w, const Eigen::Vector3d& p) {
  const Eigen::Matrix3d r = rotation_from_axis_angle(w);
  Eigen::Matrix3d jac;
  const double theta2 = w.squaredNorm();
  if (theta2 < 1e-20) {
    // dR/dw_i at w = 0 is [e_i]x, so d(Rp)/dw = -[p]x.
    jac = -skew(r * p);
    return jac;
  }
  const Eigen::Matrix3d wx = skew(w);
  const Eigen::Matrix3d i_minus_r = Eigen::Matrix3d::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Matrix3d dr =
        (w(i) * wx + skew(w.cross(i_minus_r.col(i)))) * r / theta2;
    jac.col(i) = dr * p;
  }
  return jac;
}

/// Stacked reprojection residuals (predicted - observed, u then v per corner)
/// for a fixed set of views. Parameter layout: [f, u0, v0] (only when
/// intrinsics are free) followed by [w(3), t(3)] per view.
class ReprojectionProblem {
 public:
  ReprojectionProblem(std::vector<const CalibrationView*> views, const Intrinsics& fixed,
                      bool optimize_intrinsics)
      : views_(std::move(views)), fixed_(fixed), free_intr_(optimize_intrinsics) {
    for (const auto* v : views_) num_residuals_ += 2 * static_cast<Eigen::Index>(v->correspondences.size());
  }

  Eigen::Index num_params() const {
    return (free_intr_ ? 3 : 0) + 6 * static_cast<Eigen::Index>(views_.size());
  }
  Eigen::Index num_residuals() const { return num_residuals_; }
  std::size_t num_corners() const { return static_cast<std::size_t>(num_residuals_ / 2); }

  Eigen::VectorXd pack(const Intrinsics& intr, std::span<const Extrinsics> poses) const {
    Eigen::VectorXd x(num_params());
    Eigen::Index o = 0;
    if (free_intr_) {
      x(0) = intr.f;
      x(1) = intr.pp.u;
      x(2) = intr.pp.v;
      o = 3;
    }
    for (const auto& e : poses) {
      x.segment<3>(o) = axis_angle_from_rotation(e.rot);
      x.segment<3>(o + 3) = e.t;
      o += 6;
    }
    return x;
  }

  Intrinsics intrinsics(const Eigen::VectorXd& x) const {
    if (!free_intr_) return fixed_;
    return Intrinsics{x(0), {x(1), x(2)}};
  }

  std::vector<Extrinsics> poses(const Eigen::VectorXd& x) const {
    std::vector<Extrinsics> out;
    Eigen::Index o = free_intr_ ? 3 : 0;
    for (std::size_t k = 0; k < views_.size(); ++k, o += 6) {
      out.push_back({rotation_from_axis_angle(x.segment<3>(o)), x.segment<3>(o + 3)});
    }
    return out;
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(num_residuals_);
    evaluate(x, r, nullptr);
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(num_residuals_);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(num_residuals_, num_params());
    evaluate(x, r, &j);
    return j;
  }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const Intrinsics intr = intrinsics(x);
    const Eigen::Index base = free_intr_ ? 3 : 0;
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < views_.size(); ++k) {
      const Eigen::Index o = base + 6 * static_cast<Eigen::Index>(k);
      const Eigen::Vector3d w = x.segment<3>(o);
      const Eigen::Matrix3d rot = rotation_from_axis_angle(w);
      const Eigen::Vector3d t = x.segment<3>(o + 3);
      for (const auto& c : views_[k]->correspondences) {
        const Eigen::Vector3d p(c.board.x, c.board.y, 0.0);
        const Eigen::Vector3d xc = rot * p + t;
        const double iz = 1.0 / xc.z();
        const double xn = xc.x() * iz, yn = xc.y() * iz;
        r(row) = intr.f * xn + intr.pp.u - c.image.u;
        r(row + 1) = intr.f * yn + intr.pp.v - c.image.v;
        if (jac) {
          auto& j = *jac;
          if (free_intr_) {
            j(row, 0) = xn;
            j(row, 1) = 1.0;
            j(row + 1, 0) = yn;
            j(row + 1, 2) = 1.0;
          }
          Eigen::Matrix<double, 2, 3> dproj;
          dproj << intr.f * iz, 0, -intr.f * xn * iz, 0, intr.f * iz, -intr.f * yn * iz;
          j.block<2, 3>(row, o) = dproj * rotate_point_jacobian(w, p);
          j.block<2, 3>(row, o + 3) = dproj;
        }
        row += 2;
      }
    }
  }

 private:
  std::vector<const CalibrationView*> views_;
  Intrinsics fixed_;
  bool free_intr_;
  Eigen::Index num_residuals_ = 0;
};

struct LevenbergMarquardtReport {
  Eigen::VectorXd x;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> accepted_costs;  // cost after every accepted step
  int iterations = 0;
  bool converged = false;
};

/// Marquardt-scaled damping: lambda x10 on reject, x0.1 on accept; stops on
/// relative cost change below `rel_tolerance` or after `max_iters` steps.
inline LevenbergMarquardtReport levenberg_marquardt(const ReprojectionProblem& problem,
                                                    Eigen::VectorXd x,
                                                    const RefineOptions& opts = {}) {
  LevenbergMarquardtReport rep;
  Eigen::VectorXd r = problem.residuals(x);
  double cost = r.squaredNorm();
  rep.initial_cost = cost;
  double lambda = opts.initial_lambda;

  while (rep.iterations < opts.max_iters) {
    if (cost == 0.0) {
      rep.converged = true;
      break;
    }
    ++rep.iterations;
    const Eigen::MatrixXd j = problem.jacobian(x);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    Eigen::MatrixXd a = jtj;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      a(i, i) += lambda * std::max(jtj(i, i), 1e-12);
    }
    const Eigen::VectorXd step = a.ldlt().solve(-g);
    const Eigen::VectorXd candidate = x + step;
    const Eigen::VectorXd r_new = problem.residuals(candidate);
    const double cost_new = r_new.squaredNorm();
    if (std::isfinite(cost_new) && cost_new < cost) {
      const double rel = (cost - cost_new) / cost;
      x = candidate;
      r = r_new;
      cost = cost_new;
      rep.accepted_costs.push_back(cost);
      lambda = std::max(lambda * 0.1, 1e-15);
      if (rel < opts.rel_tolerance) {
        rep.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e16) {
        // No descent direction left at machine precision.
        rep.converged = true;
        break;
      }
    }
  }
  rep.x = std::move(x);
  rep.final_cost = cost;
  return rep;
}

/// Joint refinement of intrinsics and the accepted views' poses.
inline CalibrationResult refine(const CalibrationResult& input,
                                std::span<const CalibrationView> views,
                                const RefineOptions& opts = {}) {
  if (input.view_ids.size() < 2 && opts.optimize_intrinsics) {
    throw Error(ErrorCode::kInsufficientViews, "refinement needs at least 2 views");
  }
  std::vector<const CalibrationView*> used;
  for (const auto& id : input.view_ids) {
    const CalibrationView* v = detail::find_view(views, id);
    if (!v) throw Error(ErrorCode::kInsufficientViews, "view '" + id + "' not supplied");
    used.push_back(v);
  }
  const ReprojectionProblem problem(used, input.intrinsics, opts.optimize_intrinsics);
  const auto rep = levenberg_marquardt(problem, problem.pack(input.intrinsics, input.per_view), opts);

  CalibrationResult out = input;
  out.method = Method::kRefined;
  out.iterations = rep.iterations;
  out.converged = rep.converged;
  if (!rep.converged) out.flags.push_back("NonConvergence");
  // Keep the input when LM could not improve it (e.g. already optimal).
  if (rep.final_cost < rep.initial_cost) {
    out.intrinsics = problem.intrinsics(rep.x);
    out.per_view = problem.poses(rep.x);
  }
  const double cost = std::min(rep.final_cost, rep.initial_cost);
  out.rmse = std::sqrt(cost / static_cast<double>(problem.num_corners()));
  return out;
}

/// Pose-only fit of one view with frozen intrinsics: closed form from the
/// homography, optionally polished by LM.
inline Extrinsics fit_pose(const CalibrationView& view, const Intrinsics& intr,
                           bool polish = true) {
  Extrinsics e = extrinsics_from_homography(view.homography, intr);
  if (!polish) return e;
  const ReprojectionProblem problem({&view}, intr, false);
  const Extrinsics poses[] = {e};
  const auto rep = levenberg_marquardt(problem, problem.pack(intr, poses));
  if (rep.final_cost < rep.initial_cost) e = problem.poses(rep.x).front();
  return e;
}

}  // namespace caliblab
