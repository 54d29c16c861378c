#pragma once

// Synthetic checkerboard datasets with ground truth. The true principal
// point moves with the focal setting (a monotone drift along a fixed image
// direction) and with the camera pose (a gravity-induced offset for the
// tipped N / W / E poses).

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "caliblab/calibrate.hpp"
#include "caliblab/camera.hpp"
#include "caliblab/error.hpp"
#include "caliblab/parallel.hpp"

namespace caliblab {

enum class PoseLabel { kDown, kNorth, kWest, kEast };

inline constexpr std::array<PoseLabel, 4> kAllPoses = {PoseLabel::kDown, PoseLabel::kNorth,
                                                       PoseLabel::kWest, PoseLabel::kEast};

constexpr std::string_view pose_name(PoseLabel p) {
  switch (p) {
    case PoseLabel::kDown: return "DOWN";
    case PoseLabel::kNorth: return "N";
    case PoseLabel::kWest: return "W";
    case PoseLabel::kEast: return "E";
  }
  return "?";
}

inline std::optional<PoseLabel> parse_pose(std::string_view s) {
  for (PoseLabel p : kAllPoses) {
    if (pose_name(p) == s) return p;
  }
  return std::nullopt;
}

struct FocalSetting {
  double label_mm = 0.0;
  double f_px = 0.0;
  friend bool operator==(const FocalSetting&, const FocalSetting&) = default;
};

enum class DriftProfile { kLinear, kSaturating };

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Unit vector pointing NNE in image coordinates (v axis points down).
inline Eigen::Vector2d nne_direction() {
  return {std::sin(deg2rad(22.5)), -std::cos(deg2rad(22.5))};
}

struct DriftModel {
  Point2 pp0{3024.0, 2012.0};
  Eigen::Vector2d drift_dir = nne_direction();
  double drift_total = 120.0;
  DriftProfile drift_profile = DriftProfile::kLinear;
  double gravity_px = 15.0;
  double pose_tilt_deg = 10.0;
  /// +1: the PP moves against the in-image gravity component; -1 flips it.
  double gravity_sign = 1.0;
};

struct SceneConfig {
  std::string camera_id = "cam1";
  int board_rows = 21;  // inner corners
  int board_cols = 31;
  double square_mm = 10.0;
  int width = 6048;
  int height = 4024;
  double tilt_deg = 45.0;
  std::vector<double> rolls = {0, 45, 90, 135, 180, 225, 270, 315};
  double noise_sigma_px = 0.0;
  std::uint64_t rng_seed = 1;
  double fill_fraction = 0.6;
  std::vector<FocalSetting> focal_settings;
  std::vector<PoseLabel> poses = {kAllPoses.begin(), kAllPoses.end()};
  DriftModel drift;
};

inline constexpr double kPixelPitchMm = 0.004;

/// Camera presets (resolution and zoom samples of four consumer cameras).
inline SceneConfig camera_preset(int index) {
  struct Preset {
    const char* id;
    int w, h;
    std::array<double, 7> mm;
  };
  static constexpr std::array<Preset, 4> presets = {{
      {"cam1", 6048, 4024, {18, 22, 24, 27, 30, 35, 50}},
      {"cam2", 5184, 3456, {18, 23, 28, 30, 34, 39, 42}},
      {"cam3", 6000, 3376, {33, 40, 44, 50, 55, 60, 65}},
      {"cam4", 6000, 3376, {16, 21, 26, 33, 38, 45, 50}},
  }};
  if (index < 1 || index > 4) {
    throw Error(ErrorCode::kInvalidConfig, "camera preset must be 1..4");
  }
  const Preset& p = presets[static_cast<std::size_t>(index - 1)];
  SceneConfig cfg;
  cfg.camera_id = p.id;
  cfg.width = p.w;
  cfg.height = p.h;
  cfg.drift.pp0 = {p.w / 2.0, p.h / 2.0};
  for (double mm : p.mm) cfg.focal_settings.push_back({mm, mm / kPixelPitchMm});
  return cfg;
}

inline SceneConfig default_scene_config() { return camera_preset(1); }

inline void validate(const SceneConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); };
  if (!(c.tilt_deg > 0.0 && c.tilt_deg < 90.0)) {
    fail("tilt_deg must lie strictly between 0 and 90 degrees: the dihedral angle between "
         "image plane and board is degenerate at " + std::to_string(c.tilt_deg));
  }
  if (c.rolls.size() < 2) fail("need at least 2 rolls");
  if (c.width <= 0 || c.height <= 0) fail("image width and height must be positive");
  if (c.board_rows < 2 || c.board_cols < 2) fail("board needs at least 2x2 inner corners");
  if (c.board_rows * c.board_cols < 4) fail("board needs at least 4 corners");
  if (!(c.square_mm > 0.0)) fail("square_mm must be positive");
  if (!(c.noise_sigma_px >= 0.0)) fail("noise_sigma_px must be >= 0");
  if (!(c.fill_fraction > 0.0 && c.fill_fraction < 1.0)) fail("fill_fraction must be in (0, 1)");
  if (c.focal_settings.empty()) fail("need at least one focal setting");
  if (c.poses.empty()) fail("need at least one pose");
  for (std::size_t i = 0; i < c.focal_settings.size(); ++i) {
    if (!(c.focal_settings[i].f_px > 0.0)) fail("f_px must be positive");
    if (i > 0 && !(c.focal_settings[i].label_mm > c.focal_settings[i - 1].label_mm)) {
      fail("focal settings must be strictly increasing in label_mm");
    }
  }
  if (std::abs(c.drift.drift_dir.norm() - 1.0) > 1e-9) fail("drift_dir must be a unit vector");
  if (!(c.drift.drift_total >= 0.0)) fail("drift_total must be >= 0");
  if (!(c.drift.gravity_px >= 0.0)) fail("gravity_px must be >= 0");
  if (!c.drift.pp0.finite()) fail("pp0 must be finite");
}

/// Unit image-plane direction of the PP offset for a tipped pose
/// (before scaling by gravity_px and gravity_sign). Pose N tips the lens so
/// gravity's in-image component points to -v; W to -u; E to +u. The PP
/// moves opposite to that component.
inline Eigen::Vector2d gravity_direction(PoseLabel pose) {
  switch (pose) {
    case PoseLabel::kDown: return {0, 0};
    case PoseLabel::kNorth: return {0, 1};
    case PoseLabel::kWest: return {1, 0};
    case PoseLabel::kEast: return {-1, 0};
  }
  return {0, 0};
}

inline double drift_fraction(DriftProfile profile, std::size_t index, std::size_t count) {
  if (count <= 1) return 0.0;
  const double x = static_cast<double>(index) / static_cast<double>(count - 1);
  if (profile == DriftProfile::kLinear) return x;
  return (1.0 - std::exp(-3.0 * x)) / (1.0 - std::exp(-3.0));
}

/// True PP at focal setting `index` of `count` under `pose`.
inline Point2 true_pp(const DriftModel& drift, std::size_t index, std::size_t count,
                      PoseLabel pose) {
  const double g = drift.drift_total * drift_fraction(drift.drift_profile, index, count);
  const Eigen::Vector2d pp = drift.pp0.vec() + drift.drift_dir * g +
                             drift.gravity_sign * drift.gravity_px * gravity_direction(pose);
  return Point2::from(pp);
}

/// Camera rotation applied for a tipped pose.
inline Eigen::Matrix3d pose_rotation(PoseLabel pose, double tilt_deg) {
  const double a = deg2rad(tilt_deg);
  switch (pose) {
    case PoseLabel::kDown: return Eigen::Matrix3d::Identity();
    case PoseLabel::kNorth: return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix();
    case PoseLabel::kWest: return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix();
    case PoseLabel::kEast: return Eigen::AngleAxisd(-a, Eigen::Vector3d::UnitY()).toRotationMatrix();
  }
  return Eigen::Matrix3d::Identity();
}

/// Board-to-camera rotation: dihedral tilt about the camera x axis, then a
/// roll about the optical axis, then the pose rotation.
inline Eigen::Matrix3d view_rotation(PoseLabel pose, double pose_tilt_deg, double tilt_deg,
                                     double roll_deg) {
  const Eigen::Matrix3d tilt =
      Eigen::AngleAxisd(deg2rad(tilt_deg), Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d roll =
      Eigen::AngleAxisd(deg2rad(roll_deg), Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return pose_rotation(pose, pose_tilt_deg) * roll * tilt;
}

/// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-view sub-seed: splitmix64 chained over (seed, pose, setting, roll).
constexpr std::uint64_t view_seed(std::uint64_t seed, PoseLabel pose, std::size_t setting,
                                  std::size_t roll) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(pose));
  h = splitmix64(h ^ static_cast<std::uint64_t>(setting));
  return splitmix64(h ^ static_cast<std::uint64_t>(roll));
}

/// Standard normal draws via Box-Muller on mt19937_64, whose output sequence
/// is fixed by the standard (std::normal_distribution's is not).
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::vector<BoardPoint> board_points(const SceneConfig& c) {
  std::vector<BoardPoint> pts;
  pts.reserve(static_cast<std::size_t>(c.board_rows * c.board_cols));
  for (int r = 0; r < c.board_rows; ++r) {
    for (int col = 0; col < c.board_cols; ++col) {
      pts.push_back({col * c.square_mm, r * c.square_mm});
    }
  }
  return pts;
}

struct GeneratedView {
  CalibrationView view;
  Extrinsics truth;
};

inline std::string view_id(PoseLabel pose, std::size_t setting, std::size_t roll) {
  return std::string(pose_name(pose)) + "_f" + std::to_string(setting) + "_r" +
         std::to_string(roll);
}

/// One view of the board: aimed so the board centre lands on the image
/// centre, at the distance where the projected board spans `fill_fraction`
/// of the image, with i.i.d. Gaussian pixel noise.
inline GeneratedView generate_view(const SceneConfig& c, PoseLabel pose, std::size_t setting,
                                   double roll_deg, GaussianSource& rng, std::string id = {}) {
  const Intrinsics intr{c.focal_settings.at(setting).f_px,
                        true_pp(c.drift, setting, c.focal_settings.size(), pose)};
  const Eigen::Matrix3d rot = view_rotation(pose, c.drift.pose_tilt_deg, c.tilt_deg, roll_deg);
  const auto pts = board_points(c);
  const Eigen::Vector3d centre((c.board_cols - 1) * c.square_mm / 2.0,
                               (c.board_rows - 1) * c.square_mm / 2.0, 0.0);
  const Eigen::Vector3d ray =
      (intr.k_inverse() * Eigen::Vector3d(c.width / 2.0, c.height / 2.0, 1.0)).normalized();

  auto pose_at = [&](double dist) { return Extrinsics{rot, dist * ray - rot * centre}; };
  auto extent = [&](const Extrinsics& e) {
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const auto& p : pts) {
      const Point2 q = project(intr, e, p);
      umin = std::min(umin, q.u);
      umax = std::max(umax, q.u);
      vmin = std::min(vmin, q.v);
      vmax = std::max(vmax, q.v);
    }
    return std::max((umax - umin) / c.width, (vmax - vmin) / c.height);
  };
  auto in_view = [&](const Extrinsics& e) {
    for (const auto& p : pts) {
      const Eigen::Vector3d xc = e.rot.col(0) * p.x + e.rot.col(1) * p.y + e.t;
      if (!(xc.z() > 0.0)) return false;
      const Point2 q = project(intr, e, p);
      if (!q.finite() || q.u < 0.0 || q.v < 0.0 || q.u > c.width || q.v > c.height) return false;
    }
    return true;
  };

  const double board_size = std::max(c.board_cols - 1, c.board_rows - 1) * c.square_mm;
  double dist = intr.f * board_size / (c.fill_fraction * std::min(c.width, c.height));
  for (int i = 0; i < 8; ++i) dist *= extent(pose_at(dist)) / c.fill_fraction;
  Extrinsics truth = pose_at(dist);
  for (int retry = 0; !in_view(truth); ++retry) {
    if (retry == 5) {
      throw Error(ErrorCode::kBoardOutOfView,
                  "board does not fit the image for view '" + id + "'");
    }
    dist *= 1.25;
    truth = pose_at(dist);
  }

  std::vector<Correspondence> corrs;
  corrs.reserve(pts.size());
  for (const auto& p : pts) {
    Point2 q = project(intr, truth, p);
    if (c.noise_sigma_px > 0.0) {
      q.u += c.noise_sigma_px * rng.next();
      q.v += c.noise_sigma_px * rng.next();
    }
    corrs.push_back({p, q});
  }
  return {CalibrationView::make(std::move(id), std::move(corrs)), truth};
}

struct GroundTruth {
  Intrinsics intrinsics;
  std::vector<Extrinsics> per_view;
};

struct DatasetCell {
  PoseLabel pose = PoseLabel::kDown;
  std::size_t setting_index = 0;
  FocalSetting setting;
  std::vector<CalibrationView> views;
  std::optional<GroundTruth> ground_truth;
};

/// Calibration views indexed by (pose, focal setting); cells are ordered
/// pose-major in the configured pose order, then by setting.
struct Dataset {
  std::string camera_id;
  std::vector<FocalSetting> settings;
  std::vector<DatasetCell> cells;

  const DatasetCell* find(PoseLabel pose, std::size_t setting) const {
    for (const auto& c : cells) {
      if (c.pose == pose && c.setting_index == setting) return &c;
    }
    return nullptr;
  }
  std::vector<PoseLabel> poses() const {
    std::vector<PoseLabel> out;
    for (const auto& c : cells) {
      if (std::find(out.begin(), out.end(), c.pose) == out.end()) out.push_back(c.pose);
    }
    return out;
  }
  std::size_t num_views() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.views.size();
    return n;
  }
};

inline Dataset generate_dataset(const SceneConfig& c) {
  validate(c);
  Dataset ds;
  ds.camera_id = c.camera_id;
  ds.settings = c.focal_settings;
  const std::size_t ns = c.focal_settings.size();
  ds.cells.resize(c.poses.size() * ns);
  parallel_for(ds.cells.size(), [&](std::size_t ci) {
    const PoseLabel pose = c.poses[ci / ns];
    const std::size_t s = ci % ns;
    DatasetCell& cell = ds.cells[ci];
    cell.pose = pose;
    cell.setting_index = s;
    cell.setting = c.focal_settings[s];
    GroundTruth gt;
    gt.intrinsics = {c.focal_settings[s].f_px, true_pp(c.drift, s, ns, pose)};
    for (std::size_t r = 0; r < c.rolls.size(); ++r) {
      GaussianSource rng(view_seed(c.rng_seed, pose, s, r));
      const std::string id = view_id(pose, s, r);
      try {
        auto gv = generate_view(c, pose, s, c.rolls[r], rng, id);
        cell.views.push_back(std::move(gv.view));
        gt.per_view.push_back(gv.truth);
      } catch (const Error& e) {
        throw Error(e.code(), std::string("cell (") + std::string(pose_name(pose)) + ", " +
                                  std::to_string(c.focal_settings[s].label_mm) +
                                  " mm): " + e.what());
      }
    }
    cell.ground_truth = std::move(gt);
  });
  return ds;
}

}  // namespace caliblab
