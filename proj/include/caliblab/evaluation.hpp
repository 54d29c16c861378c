#pragma once

// Reprojection metrics, pose-vs-pose cross-validation and PP trajectory /
// gravity-offset analysis.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "caliblab/calibrate.hpp"
#include "caliblab/error.hpp"
#include "caliblab/parallel.hpp"
#include "caliblab/refine.hpp"
#include "caliblab/scene.hpp"

namespace caliblab {

inline double reprojection_rmse(const Intrinsics& intr, const Extrinsics& extr,
                                const CalibrationView& view) {
  if (view.correspondences.empty()) {
    throw Error(ErrorCode::kEmptyView, "view '" + view.id + "' has no corners");
  }
  const auto [sq, n] = reprojection_sq_sum(intr, extr, view);
  return std::sqrt(sq / static_cast<double>(n));
}

enum class Pipeline { kGeometric, kAlgebraic, kAlgebraicRefined };

constexpr std::string_view pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::kGeometric: return "geometric";
    case Pipeline::kAlgebraic: return "algebraic";
    case Pipeline::kAlgebraicRefined: return "algebraic-refined";
  }
  return "?";
}

inline std::optional<Pipeline> parse_pipeline(std::string_view s) {
  for (Pipeline p : {Pipeline::kGeometric, Pipeline::kAlgebraic, Pipeline::kAlgebraicRefined}) {
    if (pipeline_name(p) == s) return p;
  }
  return std::nullopt;
}

struct PipelineOptions {
  GeometricOptions geometric;
  /// When false, every LM stage is skipped (algebraic-refined degrades to
  /// algebraic, cross-validation keeps closed-form poses).
  bool refine = true;
};

inline CalibrationResult run_calibration(std::span<const CalibrationView> views, Pipeline p,
                                         const PipelineOptions& opts = {}) {
  switch (p) {
    case Pipeline::kGeometric: return calibrate_geometric(views, opts.geometric);
    case Pipeline::kAlgebraic: return calibrate_algebraic(views);
    case Pipeline::kAlgebraicRefined: {
      CalibrationResult r = calibrate_algebraic(views);
      return opts.refine ? refine(r, views) : r;
    }
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown pipeline");
}

/// Mean per-view RMSE of `views` under frozen intrinsics, each pose refit.
inline double transfer_rmse(const Intrinsics& intr, std::span<const CalibrationView> views,
                            bool polish = true) {
  double sum = 0.0;
  for (const auto& v : views) sum += reprojection_rmse(intr, fit_pose(v, intr, polish), v);
  return sum / static_cast<double>(views.size());
}

struct CrossValBlock {
  std::size_t setting_index = 0;
  FocalSetting setting;
  /// rmse[a][b]: intrinsics from poses[a], extrinsics refit on poses[b].
  std::vector<std::vector<std::optional<double>>> rmse;
  std::vector<std::string> notices;

  double diagonal_mean() const {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < rmse.size(); ++i) {
      if (rmse[i][i]) {
        s += *rmse[i][i];
        ++n;
      }
    }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
  }
  double off_diagonal_mean() const {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < rmse.size(); ++i) {
      for (std::size_t j = 0; j < rmse.size(); ++j) {
        if (i != j && rmse[i][j]) {
          s += *rmse[i][j];
          ++n;
        }
      }
    }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t absent() const {
    std::size_t n = 0;
    for (const auto& row : rmse) {
      for (const auto& e : row) n += e ? 0 : 1;
    }
    return n;
  }
};

struct CrossValReport {
  Pipeline pipeline = Pipeline::kGeometric;
  std::vector<PoseLabel> poses;
  std::vector<CrossValBlock> blocks;

  std::size_t entries() const { return blocks.size() * poses.size() * poses.size(); }
  std::size_t absent() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.absent();
    return n;
  }
};

/// For each focal setting: calibrate every pose, then for every (A, B)
/// freeze A's intrinsics, refit each B view's pose and average the RMSE.
/// Cells that are missing or fail to calibrate leave entries absent.
inline CrossValReport cross_validate(const Dataset& ds, Pipeline pipeline,
                                     const PipelineOptions& opts = {}) {
  CrossValReport rep;
  rep.pipeline = pipeline;
  rep.poses = ds.poses();
  const std::size_t np = rep.poses.size();
  const std::size_t ns = ds.settings.size();
  if (np < 2) {
    throw Error(ErrorCode::kMissingCell, "cross-validation needs at least 2 poses");
  }

  std::vector<std::optional<Intrinsics>> intr(ns * np);
  std::vector<std::string> failure(ns * np);
  parallel_for(ns * np, [&](std::size_t i) {
    const DatasetCell* cell = ds.find(rep.poses[i % np], i / np);
    if (!cell) {
      failure[i] = "missing cell";
      return;
    }
    try {
      intr[i] = run_calibration(cell->views, pipeline, opts).intrinsics;
    } catch (const Error& e) {
      failure[i] = e.what();
    }
  });

  std::vector<std::optional<double>> entry(ns * np * np);
  parallel_for(entry.size(), [&](std::size_t i) {
    const std::size_t s = i / (np * np), a = (i / np) % np, b = i % np;
    const auto& ia = intr[s * np + a];
    const DatasetCell* cell = ds.find(rep.poses[b], s);
    if (!ia || !cell || cell->views.empty()) return;
    try {
      entry[i] = transfer_rmse(*ia, cell->views, opts.refine);
    } catch (const Error&) {
    }
  });

  for (std::size_t s = 0; s < ns; ++s) {
    CrossValBlock block;
    block.setting_index = s;
    block.setting = ds.settings[s];
    block.rmse.assign(np, std::vector<std::optional<double>>(np));
    for (std::size_t a = 0; a < np; ++a) {
      if (!failure[s * np + a].empty()) {
        block.notices.push_back(std::string(pose_name(rep.poses[a])) + ": " +
                                failure[s * np + a]);
      }
      for (std::size_t b = 0; b < np; ++b) block.rmse[a][b] = entry[(s * np + a) * np + b];
    }
    rep.blocks.push_back(std::move(block));
  }
  return rep;
}

struct TrajectoryReport {
  /// Orientation of the total-least-squares line, degrees in [0, 180),
  /// image u axis = 0, increasing toward +v.
  double direction_deg = 0.0;
  /// Spearman correlation between focal index and the signed projection on
  /// the TLS axis, oriented toward +u (toward +v when vertical).
  double monotonicity = 0.0;
  double total_shift_px = 0.0;
  std::vector<Eigen::Vector2d> per_step;
  bool degenerate = false;
};

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return detail::pearson(detail::average_ranks(a), detail::average_ranks(b));
}

inline TrajectoryReport analyze_trajectory(std::span<const Point2> pps) {
  if (pps.size() < 3) {
    throw Error(ErrorCode::kTooFewPoints,
                "trajectory needs at least 3 points, got " + std::to_string(pps.size()));
  }
  TrajectoryReport rep;
  for (std::size_t i = 1; i < pps.size(); ++i) rep.per_step.push_back(pps[i].vec() - pps[i - 1].vec());
  rep.total_shift_px = (pps.back().vec() - pps.front().vec()).norm();

  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pps) centroid += p.vec();
  centroid /= static_cast<double>(pps.size());
  double spread = 0.0;
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : pps) {
    const Eigen::Vector2d d = p.vec() - centroid;
    spread = std::max(spread, d.norm());
    scatter += d * d.transpose();
  }
  if (spread < 1e-9) {
    rep.degenerate = true;
    return rep;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  Eigen::Vector2d axis = eig.eigenvectors().col(1);
  if (axis.x() < 0.0 || (axis.x() == 0.0 && axis.y() < 0.0)) axis = -axis;
  double deg = rad2deg(std::atan2(axis.y(), axis.x()));
  if (deg < 0.0) deg += 180.0;
  if (deg >= 180.0) deg -= 180.0;
  rep.direction_deg = deg;

  std::vector<double> index(pps.size()), proj(pps.size());
  for (std::size_t i = 0; i < pps.size(); ++i) {
    index[i] = static_cast<double>(i);
    proj[i] = (pps[i].vec() - centroid).dot(axis);
  }
  rep.monotonicity = spearman(index, proj);
  return rep;
}

/// Difference between two line orientations in degrees, in [0, 90].
inline double orientation_difference_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

/// Orientation in [0, 180) of an image direction, as reported by
/// analyze_trajectory.
inline double orientation_deg(const Eigen::Vector2d& dir) {
  double deg = rad2deg(std::atan2(dir.y(), dir.x()));
  while (deg < 0.0) deg += 180.0;
  while (deg >= 180.0) deg -= 180.0;
  return deg;
}

struct GravityReport {
  std::vector<std::size_t> settings;
  /// offsets[setting position][pose] = pose PP - DOWN PP.
  std::vector<std::map<PoseLabel, Eigen::Vector2d>> offsets;
  std::map<PoseLabel, double> mean_offset_magnitude;
  std::map<PoseLabel, Eigen::Vector2d> mean_offset;
  double sideway_ratio = 0.0;
  /// Mean W and E offsets lie strictly on opposite sides of the mean N axis.
  bool we_opposite_sides = false;
};

using PoseSettingKey = std::pair<PoseLabel, std::size_t>;

inline GravityReport analyze_gravity(const std::map<PoseSettingKey, Point2>& pps,
                                     const Eigen::Vector2d& drift_direction) {
  GravityReport rep;
  for (const auto& [key, pp] : pps) {
    if (std::find(rep.settings.begin(), rep.settings.end(), key.second) == rep.settings.end()) {
      rep.settings.push_back(key.second);
    }
  }
  std::sort(rep.settings.begin(), rep.settings.end());
  const Eigen::Vector2d along = drift_direction.normalized();
  const Eigen::Vector2d across(-along.y(), along.x());

  double par = 0.0, perp = 0.0;
  std::size_t count = 0;
  std::map<PoseLabel, std::size_t> per_pose;
  for (std::size_t s : rep.settings) {
    const auto down = pps.find({PoseLabel::kDown, s});
    if (down == pps.end()) {
      throw Error(ErrorCode::kMissingPose, "DOWN pose missing at setting " + std::to_string(s));
    }
    std::map<PoseLabel, Eigen::Vector2d> row;
    for (PoseLabel p : {PoseLabel::kNorth, PoseLabel::kWest, PoseLabel::kEast}) {
      const auto it = pps.find({p, s});
      if (it == pps.end()) continue;
      const Eigen::Vector2d off = it->second.vec() - down->second.vec();
      row[p] = off;
      rep.mean_offset_magnitude[p] += off.norm();
      rep.mean_offset.try_emplace(p, Eigen::Vector2d::Zero()).first->second += off;
      ++per_pose[p];
      par += std::abs(off.dot(along));
      perp += std::abs(off.dot(across));
      ++count;
    }
    rep.offsets.push_back(std::move(row));
  }
  for (auto& [p, n] : per_pose) {
    rep.mean_offset_magnitude[p] /= static_cast<double>(n);
    rep.mean_offset[p] /= static_cast<double>(n);
  }
  if (count) {
    par /= static_cast<double>(count);
    perp /= static_cast<double>(count);
  }
  if (perp < 1e-9) {
    rep.sideway_ratio = 0.0;
  } else if (par < 1e-9) {
    rep.sideway_ratio = std::numeric_limits<double>::infinity();
  } else {
    rep.sideway_ratio = perp / par;
  }

  const auto n = rep.mean_offset.find(PoseLabel::kNorth);
  const auto w = rep.mean_offset.find(PoseLabel::kWest);
  const auto e = rep.mean_offset.find(PoseLabel::kEast);
  if (n != rep.mean_offset.end() && w != rep.mean_offset.end() && e != rep.mean_offset.end() &&
      n->second.norm() > 0.0) {
    auto side = [&](const Eigen::Vector2d& v) {
      return n->second.x() * v.y() - n->second.y() * v.x();
    };
    rep.we_opposite_sides = side(w->second) * side(e->second) < 0.0;
  }
  return rep;
}

}  // namespace caliblab
