#pragma once

// Dataset JSON, CSV tables and the PP scatter SVG.
//
// Dataset file layout (one JSON document, keys in this order):
//   {camera_id, cells: [{pose, focal_label_mm, focal_px?,
//                        views: [{id, corners: [{x_mm, y_mm, u_px, v_px}]}],
//                        ground_truth?: {f_px, u0_px, v0_px,
//                                        extrinsics: [{rot: [9], t: [3]}]}}]}
// Numbers are rounded to 9 significant digits; corners are row-major from
// the board origin.

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "caliblab/evaluation.hpp"
#include "caliblab/scene.hpp"

namespace caliblab::io {

using Json = nlohmann::ordered_json;

/// Rounds to 9 significant digits (the on-disk precision).
inline double round9(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

inline std::string fmt9(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

/// Writes via a sibling temp file and rename, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open " + tmp.string());
    out << content;
    if (!out.flush()) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json dataset_to_json(const Dataset& ds) {
  Json root;
  root["camera_id"] = ds.camera_id;
  Json cells = Json::array();
  for (const auto& cell : ds.cells) {
    Json jc;
    jc["pose"] = std::string(pose_name(cell.pose));
    jc["focal_label_mm"] = round9(cell.setting.label_mm);
    if (cell.setting.f_px > 0.0) jc["focal_px"] = round9(cell.setting.f_px);
    Json views = Json::array();
    for (const auto& v : cell.views) {
      Json corners = Json::array();
      for (const auto& c : v.correspondences) {
        corners.push_back({{"x_mm", round9(c.board.x)},
                           {"y_mm", round9(c.board.y)},
                           {"u_px", round9(c.image.u)},
                           {"v_px", round9(c.image.v)}});
      }
      views.push_back({{"id", v.id}, {"corners", std::move(corners)}});
    }
    jc["views"] = std::move(views);
    if (cell.ground_truth) {
      const auto& gt = *cell.ground_truth;
      Json ex = Json::array();
      for (const auto& e : gt.per_view) {
        Json rot = Json::array(), t = Json::array();
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) rot.push_back(round9(e.rot(r, c)));
        }
        for (int i = 0; i < 3; ++i) t.push_back(round9(e.t(i)));
        ex.push_back({{"rot", std::move(rot)}, {"t", std::move(t)}});
      }
      jc["ground_truth"] = {{"f_px", round9(gt.intrinsics.f)},
                            {"u0_px", round9(gt.intrinsics.pp.u)},
                            {"v0_px", round9(gt.intrinsics.pp.v)},
                            {"extrinsics", std::move(ex)}};
    }
    cells.push_back(std::move(jc));
  }
  root["cells"] = std::move(cells);
  return root;
}

inline std::string dataset_to_string(const Dataset& ds) { return dataset_to_json(ds).dump() + "\n"; }

inline Dataset dataset_from_json(const Json& root) {
  try {
    Dataset ds;
    ds.camera_id = root.at("camera_id").get<std::string>();
    std::vector<double> labels;
    std::map<double, double> f_of_label;
    for (const auto& jc : root.at("cells")) {
      const double mm = jc.at("focal_label_mm").get<double>();
      if (std::find(labels.begin(), labels.end(), mm) == labels.end()) labels.push_back(mm);
      if (jc.contains("focal_px")) f_of_label[mm] = jc["focal_px"].get<double>();
    }
    std::sort(labels.begin(), labels.end());
    for (double mm : labels) {
      ds.settings.push_back({mm, f_of_label.count(mm) ? f_of_label[mm] : 0.0});
    }
    for (const auto& jc : root.at("cells")) {
      DatasetCell cell;
      const auto pose = parse_pose(jc.at("pose").get<std::string>());
      if (!pose) throw Error(ErrorCode::kParseError, "unknown pose " + jc.at("pose").dump());
      cell.pose = *pose;
      const double mm = jc.at("focal_label_mm").get<double>();
      cell.setting_index = static_cast<std::size_t>(
          std::find(labels.begin(), labels.end(), mm) - labels.begin());
      cell.setting = ds.settings[cell.setting_index];
      for (const auto& jv : jc.at("views")) {
        std::vector<Correspondence> corrs;
        for (const auto& k : jv.at("corners")) {
          corrs.push_back({{k.at("x_mm").get<double>(), k.at("y_mm").get<double>()},
                           {k.at("u_px").get<double>(), k.at("v_px").get<double>()}});
        }
        cell.views.push_back(CalibrationView::make(jv.at("id").get<std::string>(), std::move(corrs)));
      }
      if (jc.contains("ground_truth")) {
        const auto& jg = jc["ground_truth"];
        GroundTruth gt;
        gt.intrinsics = {jg.at("f_px").get<double>(),
                         {jg.at("u0_px").get<double>(), jg.at("v0_px").get<double>()}};
        for (const auto& je : jg.at("extrinsics")) {
          Extrinsics e;
          const auto& rot = je.at("rot");
          const auto& t = je.at("t");
          if (rot.size() != 9 || t.size() != 3) {
            throw Error(ErrorCode::kParseError, "extrinsics need rot[9] and t[3]");
          }
          for (int i = 0; i < 9; ++i) e.rot(i / 3, i % 3) = rot[static_cast<std::size_t>(i)].get<double>();
          for (int i = 0; i < 3; ++i) e.t(i) = t[static_cast<std::size_t>(i)].get<double>();
          gt.per_view.push_back(e);
        }
        cell.ground_truth = std::move(gt);
      }
      ds.cells.push_back(std::move(cell));
    }
    return ds;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("dataset JSON: ") + e.what());
  }
}

inline Dataset dataset_from_string(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("dataset JSON: ") + e.what());
  }
  return dataset_from_json(root);
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  write_file_atomic(path, dataset_to_string(ds));
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  return dataset_from_string(read_file(path));
}

/// Outcome of calibrating one (pose, setting) cell.
struct CellResult {
  PoseLabel pose = PoseLabel::kDown;
  std::size_t setting_index = 0;
  FocalSetting setting;
  std::string method;
  std::string status = "ok";  // "ok" or an error code name
  std::string message;
  std::size_t num_views = 0;
  std::optional<CalibrationResult> result;
  std::optional<Intrinsics> truth;
};

inline constexpr const char* kResultsHeader =
    "pose,focal_label_mm,method,status,n_views,n_accepted,u0_px,v0_px,f_px,rmse_px,flags,"
    "gt_u0_px,gt_v0_px,gt_f_px";

inline std::string results_csv(const std::vector<CellResult>& rows) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : rows) {
    std::string flags;
    std::size_t accepted = 0;
    double u0 = NAN, v0 = NAN, f = NAN, rmse = NAN;
    if (r.result) {
      for (const auto& fl : r.result->flags) flags += (flags.empty() ? "" : ";") + fl;
      accepted = r.result->view_ids.size();
      u0 = r.result->intrinsics.pp.u;
      v0 = r.result->intrinsics.pp.v;
      f = r.result->intrinsics.f;
      rmse = r.result->rmse;
    }
    out += std::string(pose_name(r.pose)) + "," + fmt9(r.setting.label_mm) + "," + r.method + "," +
           r.status + "," + std::to_string(r.num_views) + "," + std::to_string(accepted) + "," +
           fmt9(u0) + "," + fmt9(v0) + "," + fmt9(f) + "," + fmt9(rmse) + "," + flags + "," +
           (r.truth ? fmt9(r.truth->pp.u) + "," + fmt9(r.truth->pp.v) + "," + fmt9(r.truth->f)
                    : std::string(",,"));
    out += "\n";
  }
  return out;
}

inline constexpr const char* kCrossValHeader = "focal_label_mm,intrinsics_pose,views_pose,rmse_px";

inline std::string crossval_csv(const CrossValReport& rep) {
  std::string out = std::string(kCrossValHeader) + "\n";
  for (const auto& b : rep.blocks) {
    for (std::size_t a = 0; a < rep.poses.size(); ++a) {
      for (std::size_t v = 0; v < rep.poses.size(); ++v) {
        out += fmt9(b.setting.label_mm) + "," + std::string(pose_name(rep.poses[a])) + "," +
               std::string(pose_name(rep.poses[v])) + "," +
               (b.rmse[a][v] ? fmt9(*b.rmse[a][v]) : std::string()) + "\n";
      }
    }
  }
  return out;
}

inline constexpr const char* kTrajectoryHeader =
    "pose,n_points,direction_deg,monotonicity,total_shift_px,degenerate";

inline std::string trajectory_csv(const std::vector<std::pair<PoseLabel, TrajectoryReport>>& reps,
                                  const std::map<PoseLabel, std::size_t>& counts) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (const auto& [pose, t] : reps) {
    out += std::string(pose_name(pose)) + "," + std::to_string(counts.at(pose)) + "," +
           fmt9(t.direction_deg) + "," + fmt9(t.monotonicity) + "," + fmt9(t.total_shift_px) + "," +
           (t.degenerate ? "1" : "0") + "\n";
  }
  return out;
}

inline constexpr const char* kGravityHeader = "focal_label_mm,pose,du_px,dv_px,magnitude_px";

inline std::string gravity_csv(const GravityReport& rep, const std::vector<FocalSetting>& settings) {
  std::string out = std::string(kGravityHeader) + "\n";
  for (std::size_t k = 0; k < rep.settings.size(); ++k) {
    for (const auto& [pose, off] : rep.offsets[k]) {
      out += fmt9(settings[rep.settings[k]].label_mm) + "," + std::string(pose_name(pose)) + "," +
             fmt9(off.x()) + "," + fmt9(off.y()) + "," + fmt9(off.norm()) + "\n";
    }
  }
  return out;
}

/// PP scatter, one panel per pose. Points are coloured by focal index; the
/// DOWN locus is repeated as gray circles in every other panel.
inline std::string pp_scatter_svg(const std::map<PoseSettingKey, Point2>& pps,
                                  std::size_t num_settings) {
  std::vector<PoseLabel> poses;
  for (const auto& [k, p] : pps) {
    if (std::find(poses.begin(), poses.end(), k.first) == poses.end()) poses.push_back(k.first);
  }
  std::sort(poses.begin(), poses.end());
  double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
  for (const auto& [k, p] : pps) {
    umin = std::min(umin, p.u);
    umax = std::max(umax, p.u);
    vmin = std::min(vmin, p.v);
    vmax = std::max(vmax, p.v);
  }
  if (pps.empty()) umin = umax = vmin = vmax = 0.0;
  const double span = std::max({umax - umin, vmax - vmin, 1.0}) * 1.15;
  const double cu = 0.5 * (umin + umax), cv = 0.5 * (vmin + vmax);
  const double panel = 260.0, pad = 30.0;
  const std::size_t npanels = std::max<std::size_t>(poses.size(), 1);
  const double width = npanels * (panel + pad) + pad, height = panel + 2 * pad + 20;

  auto colour = [&](std::size_t i) {
    const double t = num_settings > 1 ? static_cast<double>(i) / (num_settings - 1) : 0.0;
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(40 + 200 * t), 60,
                  static_cast<int>(220 - 180 * t));
    return std::string(buf);
  };
  auto num = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return std::string(buf);
  };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
       num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" style=\"fill:#ffffff\"/>\n";
  for (std::size_t pi = 0; pi < poses.size(); ++pi) {
    const double x0 = pad + pi * (panel + pad), y0 = pad + 20;
    auto px = [&](const Point2& p) { return x0 + panel / 2 + (p.u - cu) / span * panel; };
    auto py = [&](const Point2& p) { return y0 + panel / 2 + (p.v - cv) / span * panel; };
    s += "<g>\n<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(panel) +
         "\" height=\"" + num(panel) + "\" style=\"fill:none;stroke:#333333;stroke-width:1\"/>\n";
    s += "<text x=\"" + num(x0) + "\" y=\"" + num(y0 - 8) +
         "\" style=\"font-family:sans-serif;font-size:13px;fill:#000000\">" +
         std::string(pose_name(poses[pi])) + "</text>\n";
    if (poses[pi] != PoseLabel::kDown) {
      for (std::size_t i = 0; i < num_settings; ++i) {
        const auto it = pps.find({PoseLabel::kDown, i});
        if (it == pps.end()) continue;
        s += "<circle cx=\"" + num(px(it->second)) + "\" cy=\"" + num(py(it->second)) +
             "\" r=\"5\" style=\"fill:none;stroke:#999999;stroke-width:1.5\"/>\n";
      }
    }
    for (std::size_t i = 0; i < num_settings; ++i) {
      const auto it = pps.find({poses[pi], i});
      if (it == pps.end()) continue;
      s += "<circle cx=\"" + num(px(it->second)) + "\" cy=\"" + num(py(it->second)) +
           "\" r=\"3.5\" style=\"fill:" + colour(i) + ";stroke:none\"/>\n";
    }
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace caliblab::io
