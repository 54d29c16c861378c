#pragma once

// caliblab command line: simulate | calibrate | crossval | analyze.
//
// Exit codes: 0 success, 2 invalid configuration or input, 3 dataset
// generation failed, 4 calibration failed in at least one cell, 5 too many
// missing cells (more than 25% of entries absent, or fewer than 2 poses).

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caliblab/evaluation.hpp"
#include "caliblab/io.hpp"
#include "caliblab/parallel.hpp"
#include "caliblab/scene.hpp"

namespace caliblab::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kGenerationError = 3,
  kCalibrationError = 4,
  kMissingCells = 5,
};

enum class Command { kSimulate, kCalibrate, kCrossval, kAnalyze };

struct RunConfig {
  Command command = Command::kSimulate;
  std::string config_path;
  std::string dataset_path;
  std::string out_dir = ".";
  Pipeline method = Pipeline::kGeometric;
  bool method_given = false;
  std::optional<SceneConfig> scene;
  double pl_outlier_px = kDefaultOutlierPx;
  bool refine = true;
  std::optional<std::size_t> max_views;
  std::optional<std::uint64_t> seed;
};

inline constexpr double kMaxAbsentFraction = 0.25;

/// Scene from JSON. Unlisted fields keep the defaults of `base` (or of the
/// camera preset named by "camera_preset").
inline SceneConfig scene_from_json(const io::Json& j, SceneConfig base = default_scene_config()) {
  try {
    if (j.contains("camera_preset")) base = camera_preset(j["camera_preset"].get<int>());
    SceneConfig c = base;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("camera_id", c.camera_id);
    get("board_rows", c.board_rows);
    get("board_cols", c.board_cols);
    get("square_mm", c.square_mm);
    get("width", c.width);
    get("height", c.height);
    get("tilt_deg", c.tilt_deg);
    get("rolls", c.rolls);
    get("noise_sigma_px", c.noise_sigma_px);
    get("rng_seed", c.rng_seed);
    get("fill_fraction", c.fill_fraction);
    if (j.contains("focal_settings")) {
      c.focal_settings.clear();
      for (const auto& fs : j["focal_settings"]) {
        const double mm = fs.at("label_mm").get<double>();
        const double fpx = fs.contains("f_px") ? fs["f_px"].get<double>() : mm / kPixelPitchMm;
        c.focal_settings.push_back({mm, fpx});
      }
    }
    if (j.contains("poses")) {
      c.poses.clear();
      for (const auto& p : j["poses"]) {
        const auto pose = parse_pose(p.get<std::string>());
        if (!pose) throw Error(ErrorCode::kInvalidConfig, "unknown pose " + p.dump());
        c.poses.push_back(*pose);
      }
    }
    if (j.contains("drift")) {
      const auto& d = j["drift"];
      if (d.contains("pp0")) c.drift.pp0 = {d["pp0"].at(0).get<double>(), d["pp0"].at(1).get<double>()};
      if (d.contains("drift_dir")) {
        c.drift.drift_dir = {d["drift_dir"].at(0).get<double>(), d["drift_dir"].at(1).get<double>()};
      }
      if (d.contains("drift_total")) c.drift.drift_total = d["drift_total"].get<double>();
      if (d.contains("drift_profile")) {
        const auto p = d["drift_profile"].get<std::string>();
        if (p == "linear") {
          c.drift.drift_profile = DriftProfile::kLinear;
        } else if (p == "saturating") {
          c.drift.drift_profile = DriftProfile::kSaturating;
        } else {
          throw Error(ErrorCode::kInvalidConfig, "drift_profile must be linear or saturating");
        }
      }
      if (d.contains("gravity_px")) c.drift.gravity_px = d["gravity_px"].get<double>();
      if (d.contains("pose_tilt_deg")) c.drift.pose_tilt_deg = d["pose_tilt_deg"].get<double>();
      if (d.contains("gravity_sign")) c.drift.gravity_sign = d["gravity_sign"].get<double>();
    }
    return c;
  } catch (const io::Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("scene config: ") + e.what());
  }
}

/// Merges a --config file into `cfg`; command-line flags already set win.
inline void load_config_file(RunConfig& cfg) {
  io::Json j;
  try {
    j = io::Json::parse(io::read_file(cfg.config_path));
  } catch (const io::Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
  try {
    const io::Json scene = j.contains("scene") ? j["scene"] : io::Json::object();
    cfg.scene = scene_from_json(scene);
    if (cfg.dataset_path.empty() && j.contains("dataset")) cfg.dataset_path = j["dataset"].get<std::string>();
    if (!cfg.method_given && j.contains("method")) {
      const auto m = parse_pipeline(j["method"].get<std::string>());
      if (!m) throw Error(ErrorCode::kInvalidConfig, "unknown method " + j["method"].dump());
      cfg.method = *m;
      cfg.method_given = true;
    }
    if (j.contains("pl_outlier_px")) cfg.pl_outlier_px = j["pl_outlier_px"].get<double>();
    if (!cfg.max_views && j.contains("max_views")) cfg.max_views = j["max_views"].get<std::size_t>();
    if (!cfg.seed && j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  } catch (const io::Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
}

inline PipelineOptions pipeline_options(const RunConfig& cfg) {
  PipelineOptions o;
  o.geometric.outlier_px = cfg.pl_outlier_px;
  o.refine = cfg.refine;
  return o;
}

/// Applies --max-views: keeps the first N views of every cell.
inline void limit_views(Dataset& ds, std::optional<std::size_t> max_views) {
  if (!max_views) return;
  for (auto& cell : ds.cells) {
    if (cell.views.size() > *max_views) {
      cell.views.resize(*max_views);
      if (cell.ground_truth) cell.ground_truth->per_view.resize(*max_views);
    }
  }
}

inline io::CellResult calibrate_cell(const DatasetCell& cell, Pipeline method,
                                     const PipelineOptions& opts) {
  io::CellResult r;
  r.pose = cell.pose;
  r.setting_index = cell.setting_index;
  r.setting = cell.setting;
  r.method = std::string(pipeline_name(method));
  r.num_views = cell.views.size();
  if (cell.ground_truth) r.truth = cell.ground_truth->intrinsics;
  try {
    if (method != Pipeline::kGeometric && cell.views.size() < 3) {
      // Two conic constraints per view cannot pin the five conic unknowns.
      throw Error(ErrorCode::kDegenerateSystem,
                  "conic system has rank <= " + std::to_string(2 * cell.views.size()) +
                      " with " + std::to_string(cell.views.size()) + " views");
    }
    r.result = run_calibration(cell.views, method, opts);
  } catch (const Error& e) {
    r.status = std::string(error_code_name(e.code()));
    r.message = e.what();
  }
  return r;
}

inline std::vector<io::CellResult> calibrate_all(const Dataset& ds, Pipeline method,
                                                 const PipelineOptions& opts) {
  std::vector<io::CellResult> rows(ds.cells.size());
  parallel_for(ds.cells.size(), [&](std::size_t i) { rows[i] = calibrate_cell(ds.cells[i], method, opts); });
  return rows;
}

inline std::map<PoseSettingKey, Point2> calibrated_pps(const std::vector<io::CellResult>& rows) {
  std::map<PoseSettingKey, Point2> pps;
  for (const auto& r : rows) {
    if (r.result) pps[{r.pose, r.setting_index}] = r.result->intrinsics.pp;
  }
  return pps;
}

inline io::Json cells_summary(const std::vector<io::CellResult>& rows) {
  io::Json arr = io::Json::array();
  for (const auto& r : rows) {
    io::Json c;
    c["pose"] = std::string(pose_name(r.pose));
    c["focal_label_mm"] = r.setting.label_mm;
    c["status"] = r.status;
    if (!r.message.empty()) c["message"] = r.message;
    if (r.result) {
      c["u0_px"] = r.result->intrinsics.pp.u;
      c["v0_px"] = r.result->intrinsics.pp.v;
      c["f_px"] = r.result->intrinsics.f;
      c["rmse_px"] = r.result->rmse;
      c["flags"] = r.result->flags;
    }
    arr.push_back(std::move(c));
  }
  return arr;
}

inline void write_summary(const std::filesystem::path& dir, const io::Json& j) {
  io::write_file_atomic(dir / "summary.json", j.dump(2) + "\n");
}

inline Dataset load_input_dataset(const RunConfig& cfg) {
  if (cfg.dataset_path.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "no input dataset (use --dataset or a config file)");
  }
  Dataset ds = io::read_dataset(cfg.dataset_path);
  limit_views(ds, cfg.max_views);
  return ds;
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  SceneConfig scene = cfg.scene.value_or(default_scene_config());
  if (cfg.seed) scene.rng_seed = *cfg.seed;
  try {
    validate(scene);
  } catch (const Error& e) {
    log << e.what() << "\n";
    return kConfigError;
  }
  Dataset ds;
  try {
    ds = generate_dataset(scene);
  } catch (const Error& e) {
    log << e.what() << "\n";
    return kGenerationError;
  }
  limit_views(ds, cfg.max_views);
  const std::filesystem::path out = std::filesystem::path(cfg.out_dir) / "dataset.json";
  io::write_dataset(out, ds);
  log << "wrote " << ds.num_views() << " views in " << ds.cells.size() << " cells to "
      << out.string() << "\n";
  return kOk;
}

inline int cmd_calibrate(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load_input_dataset(cfg);
  const auto rows = calibrate_all(ds, cfg.method, pipeline_options(cfg));
  const std::filesystem::path dir(cfg.out_dir);
  io::write_file_atomic(dir / "results.csv", io::results_csv(rows));
  io::write_file_atomic(dir / "pp_scatter.svg", io::pp_scatter_svg(calibrated_pps(rows), ds.settings.size()));
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.result ? 0 : 1;
  io::Json s;
  s["command"] = "calibrate";
  s["method"] = std::string(pipeline_name(cfg.method));
  s["cells"] = cells_summary(rows);
  s["failed_cells"] = failed;
  write_summary(dir, s);
  for (const auto& r : rows) {
    if (!r.result) log << "cell " << pose_name(r.pose) << " " << r.setting.label_mm << " mm: " << r.message << "\n";
  }
  return failed ? kCalibrationError : kOk;
}

inline int cmd_crossval(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load_input_dataset(cfg);
  const std::filesystem::path dir(cfg.out_dir);
  if (ds.poses().size() < 2) {
    log << "cross-validation needs at least 2 poses; dataset has " << ds.poses().size() << "\n";
    return kMissingCells;
  }
  const CrossValReport rep = cross_validate(ds, cfg.method, pipeline_options(cfg));
  io::write_file_atomic(dir / "crossval.csv", io::crossval_csv(rep));
  io::Json s;
  s["command"] = "crossval";
  s["method"] = std::string(pipeline_name(cfg.method));
  io::Json blocks = io::Json::array();
  for (const auto& b : rep.blocks) {
    io::Json jb;
    jb["focal_label_mm"] = b.setting.label_mm;
    const double diag = b.diagonal_mean(), off = b.off_diagonal_mean();
    jb["diagonal_mean_px"] = std::isfinite(diag) ? io::Json(diag) : io::Json();
    jb["off_diagonal_mean_px"] = std::isfinite(off) ? io::Json(off) : io::Json();
    jb["notices"] = b.notices;
    blocks.push_back(std::move(jb));
  }
  s["settings"] = std::move(blocks);
  s["absent_entries"] = rep.absent();
  s["total_entries"] = rep.entries();
  write_summary(dir, s);
  for (const auto& b : rep.blocks) {
    for (const auto& n : b.notices) log << "notice (" << b.setting.label_mm << " mm): " << n << "\n";
  }
  const double absent = rep.entries() ? static_cast<double>(rep.absent()) / rep.entries() : 1.0;
  return absent > kMaxAbsentFraction ? kMissingCells : kOk;
}

inline int cmd_analyze(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load_input_dataset(cfg);
  const auto rows = calibrate_all(ds, cfg.method, pipeline_options(cfg));
  const auto pps = calibrated_pps(rows);
  const std::filesystem::path dir(cfg.out_dir);

  std::vector<std::pair<PoseLabel, TrajectoryReport>> trajectories;
  std::map<PoseLabel, std::size_t> counts;
  io::Json s;
  s["command"] = "analyze";
  s["method"] = std::string(pipeline_name(cfg.method));
  io::Json jt = io::Json::object();
  for (PoseLabel pose : ds.poses()) {
    std::vector<Point2> series;
    for (std::size_t i = 0; i < ds.settings.size(); ++i) {
      const auto it = pps.find({pose, i});
      if (it != pps.end()) series.push_back(it->second);
    }
    counts[pose] = series.size();
    if (series.size() < 3) {
      log << "pose " << pose_name(pose) << ": fewer than 3 calibrated settings, no trajectory\n";
      continue;
    }
    const TrajectoryReport t = analyze_trajectory(series);
    trajectories.emplace_back(pose, t);
    jt[std::string(pose_name(pose))] = {{"direction_deg", t.direction_deg},
                                        {"monotonicity", t.monotonicity},
                                        {"total_shift_px", t.total_shift_px},
                                        {"degenerate", t.degenerate}};
  }
  s["trajectory"] = std::move(jt);
  io::write_file_atomic(dir / "results.csv", io::results_csv(rows));
  io::write_file_atomic(dir / "trajectory.csv", io::trajectory_csv(trajectories, counts));
  io::write_file_atomic(dir / "pp_scatter.svg", io::pp_scatter_svg(pps, ds.settings.size()));

  // Gravity offsets are measured against the recovered DOWN drift axis.
  const auto down = std::find_if(trajectories.begin(), trajectories.end(),
                                 [](const auto& t) { return t.first == PoseLabel::kDown; });
  const auto poses = ds.poses();
  const bool tipped = std::any_of(poses.begin(), poses.end(), [](PoseLabel p) { return p != PoseLabel::kDown; });
  if (down != trajectories.end() && tipped && !down->second.degenerate) {
    const double a = deg2rad(down->second.direction_deg);
    std::map<PoseSettingKey, Point2> usable;
    for (const auto& [k, p] : pps) {
      if (pps.count({PoseLabel::kDown, k.second})) usable[k] = p;
    }
    const GravityReport g = analyze_gravity(usable, {std::cos(a), std::sin(a)});
    io::write_file_atomic(dir / "gravity.csv", io::gravity_csv(g, ds.settings));
    io::Json jg;
    for (const auto& [p, m] : g.mean_offset_magnitude) {
      jg["mean_offset_magnitude_px"][std::string(pose_name(p))] = m;
    }
    jg["sideway_ratio"] = std::isfinite(g.sideway_ratio) ? io::Json(g.sideway_ratio) : io::Json("inf");
    jg["we_opposite_sides"] = g.we_opposite_sides;
    s["gravity"] = std::move(jg);
  }
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.result ? 0 : 1;
  s["cells"] = cells_summary(rows);
  s["failed_cells"] = failed;
  write_summary(dir, s);
  const double frac = rows.empty() ? 1.0 : static_cast<double>(failed) / rows.size();
  return frac > kMaxAbsentFraction ? kMissingCells : kOk;
}

/// Parses argv and runs the command; diagnostics go to `log`.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"caliblab: principal-line and algebraic camera calibration lab"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string method = "geometric";
  bool no_refine = false;
  std::optional<std::size_t> max_views;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool needs_input) {
    sub->add_option("--config", cfg.config_path, "JSON run configuration");
    sub->add_option("--out-dir", cfg.out_dir, "output directory");
    sub->add_option("--seed", seed, "RNG seed override");
    sub->add_option("--max-views", max_views, "use at most N views per cell")->check(CLI::PositiveNumber);
    if (needs_input) {
      sub->add_option("--dataset", cfg.dataset_path, "input dataset JSON");
      sub->add_option("--method", method, "geometric | algebraic | algebraic-refined");
      sub->add_option("--pl-outlier-px", cfg.pl_outlier_px, "principal-line outlier threshold (px)");
      sub->add_flag("--no-refine", no_refine, "skip every Levenberg-Marquardt stage");
    }
  };
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  auto* cal = app.add_subcommand("calibrate", "calibrate every (pose, focal) cell");
  auto* cv = app.add_subcommand("crossval", "pose-vs-pose reprojection cross-validation");
  auto* an = app.add_subcommand("analyze", "PP trajectory and gravity-offset analysis");
  add_common(sim, false);
  for (auto* s : {cal, cv, an}) add_common(s, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, log);
    return kConfigError;
  }

  try {
    if (sim->parsed()) cfg.command = Command::kSimulate;
    if (cal->parsed()) cfg.command = Command::kCalibrate;
    if (cv->parsed()) cfg.command = Command::kCrossval;
    if (an->parsed()) cfg.command = Command::kAnalyze;
    cfg.refine = !no_refine;
    cfg.max_views = max_views;
    cfg.seed = seed;
    CLI::App* active = app.get_subcommands().front();
    const CLI::Option* method_opt = active->get_option_no_throw("--method");
    if (method_opt && method_opt->count()) {
      const auto m = parse_pipeline(method);
      if (!m) throw Error(ErrorCode::kInvalidConfig, "unknown method '" + method + "'");
      cfg.method = *m;
      cfg.method_given = true;
    }
    if (!cfg.config_path.empty()) load_config_file(cfg);
    if (cfg.out_dir.empty()) throw Error(ErrorCode::kInvalidConfig, "--out-dir must not be empty");

    switch (cfg.command) {
      case Command::kSimulate: return cmd_simulate(cfg, log);
      case Command::kCalibrate: return cmd_calibrate(cfg, log);
      case Command::kCrossval: return cmd_crossval(cfg, log);
      case Command::kAnalyze: return cmd_analyze(cfg, log);
    }
  } catch (const Error& e) {
    log << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kMissingCell: return kMissingCells;
      case ErrorCode::kBoardOutOfView: return kGenerationError;
      default: return kConfigError;
    }
  }
  return kConfigError;
}

}  // namespace caliblab::cli
