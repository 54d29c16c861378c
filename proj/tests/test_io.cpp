#include <gtest/gtest.h>

#include <filesystem>

#include "support.hpp"

using namespace caliblab;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\n') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::size_t fields(const std::string& line) { return std::count(line.begin(), line.end(), ',') + 1; }

}  // namespace

TEST(Format, NineSignificantDigits) {
  EXPECT_EQ(io::fmt9(3024.123456789123), "3024.12346");
  EXPECT_EQ(io::fmt9(0.1), "0.1");
  EXPECT_EQ(io::fmt9(NAN), "");
  EXPECT_DOUBLE_EQ(io::round9(1.23456789012), 1.23456789);
}

TEST(DatasetJson, RoundTripIsByteIdentical) {
  SceneConfig sc = fixtures::small_scene(4);
  sc.noise_sigma_px = 0.3;
  const Dataset ds = generate_dataset(sc);
  const std::string a = io::dataset_to_string(ds);
  const Dataset back = io::dataset_from_string(a);
  EXPECT_EQ(io::dataset_to_string(back), a);
  ASSERT_EQ(back.cells.size(), ds.cells.size());
  EXPECT_EQ(back.settings.size(), ds.settings.size());
  EXPECT_EQ(back.cells[5].views[2].id, ds.cells[5].views[2].id);
  EXPECT_NEAR(back.cells[5].ground_truth->intrinsics.f, ds.cells[5].ground_truth->intrinsics.f, 1e-6);
  EXPECT_NEAR(back.cells[5].views[2].correspondences[7].image.u,
              ds.cells[5].views[2].correspondences[7].image.u, 1e-5);
}

TEST(DatasetJson, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "caliblab_io_test";
  std::filesystem::create_directories(dir);
  const Dataset ds = generate_dataset(fixtures::small_scene());
  io::write_dataset(dir / "d.json", ds);
  EXPECT_EQ(io::dataset_to_string(io::read_dataset(dir / "d.json")), io::dataset_to_string(ds));
  std::filesystem::remove_all(dir);
}

TEST(DatasetJson, ParseErrors) {
  for (const std::string bad : {"{", "[]", R"({"camera_id":"c"})",
                                R"({"camera_id":"c","cells":[{"pose":"UP","focal_label_mm":1,"views":[]}]})"}) {
    try {
      io::dataset_from_string(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError) << bad;
    }
  }
  try {
    io::read_dataset("/nonexistent/dir/x.json");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST(Csv, ResultsLayout) {
  const Dataset ds = generate_dataset(fixtures::small_scene());
  std::vector<io::CellResult> rows;
  for (const auto& cell : ds.cells) {
    io::CellResult r;
    r.pose = cell.pose;
    r.setting = cell.setting;
    r.method = "geometric";
    r.num_views = cell.views.size();
    r.result = calibrate_geometric(cell.views);
    r.truth = cell.ground_truth->intrinsics;
    rows.push_back(r);
  }
  io::CellResult failed;
  failed.method = "algebraic";
  failed.status = "DegenerateSystem";
  rows.push_back(failed);
  const auto lines = lines_of(io::results_csv(rows));
  ASSERT_EQ(lines.size(), rows.size() + 1);
  EXPECT_EQ(lines[0], io::kResultsHeader);
  for (const auto& l : lines) EXPECT_EQ(fields(l), 14u) << l;
  EXPECT_EQ(lines.back(), "DOWN,0,algebraic,DegenerateSystem,0,0,,,,,,,,");
  EXPECT_EQ(lines[1].rfind("DOWN,18,geometric,ok,8,8,", 0), 0u);
}

TEST(Csv, CrossValTrajectoryGravityLayouts) {
  const Dataset ds = generate_dataset(fixtures::small_scene());
  const CrossValReport rep = cross_validate(ds, Pipeline::kGeometric);
  const auto cv = lines_of(io::crossval_csv(rep));
  EXPECT_EQ(cv[0], io::kCrossValHeader);
  EXPECT_EQ(cv.size(), 1 + 3 * 16u);
  EXPECT_EQ(cv[1].rfind("18,DOWN,DOWN,", 0), 0u);

  const std::vector<Point2> pts = {{0, 0}, {1, 0}, {2, 0}};
  const auto tr = lines_of(io::trajectory_csv({{PoseLabel::kDown, analyze_trajectory(pts)}}, {{PoseLabel::kDown, 3}}));
  EXPECT_EQ(tr[0], io::kTrajectoryHeader);
  EXPECT_EQ(tr[1], "DOWN,3,0,1,2,0");

  std::map<PoseSettingKey, Point2> pps = {{{PoseLabel::kDown, 0}, {0, 0}}, {{PoseLabel::kWest, 0}, {3, 4}}};
  const auto gr = lines_of(io::gravity_csv(analyze_gravity(pps, {0, 1}), ds.settings));
  EXPECT_EQ(gr[0], io::kGravityHeader);
  EXPECT_EQ(gr[1], "18,W,3,4,5");
}

TEST(Svg, OnePanelPerPose) {
  std::map<PoseSettingKey, Point2> pps;
  const DriftModel d;
  for (std::size_t s = 0; s < 3; ++s) {
    for (PoseLabel p : {PoseLabel::kDown, PoseLabel::kNorth}) pps[{p, s}] = true_pp(d, s, 3, p);
  }
  const std::string svg = io::pp_scatter_svg(pps, 3);
  EXPECT_NE(svg.find("<svg xmlns"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find(">DOWN<"), std::string::npos);
  EXPECT_NE(svg.find(">N<"), std::string::npos);
}
