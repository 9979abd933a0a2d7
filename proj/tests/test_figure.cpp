#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "kmrecon/figure.hpp"
#include "kmrecon/ipd.hpp"
#include "kmrecon/rng.hpp"
#include "kmrecon/sim.hpp"
#include "kmrecon/survival.hpp"

using namespace kmrecon;

TEST_CASE("interchange: single element with color") {
  const std::string doc = R"({
    "page_height": 792.0,
    "segments": [
      {"x1": 36.850399017333984, "y1": 102.797119140625,
       "x2": 566.9293823242188, "y2": 102.797119140625,
       "rgb": [0.7010, 0.0310, 0.2210], "width": 1.5}
    ]
  })";
  const SegmentSet set =
      parse_vector_document(doc, FigureFormat::segment_interchange);
  REQUIRE(set.segments.size() == 1);
  const Segment& s = set.segments[0];
  CHECK(s.x1 == 36.850399017333984);
  CHECK(s.y1 == 102.797119140625);
  CHECK(s.x2 == 566.9293823242188);
  CHECK(s.y2 == 102.797119140625);
  REQUIRE(s.color.has_value());
  CHECK(s.color->r == 0.7010);
  CHECK(s.color->g == 0.0310);
  CHECK(s.color->b == 0.2210);
  REQUIRE(s.width.has_value());
  CHECK(*s.width == 1.5);
  CHECK(set.page_height == 792.0);
}

TEST_CASE("svg: line and path primitives") {
  const std::string svg =
      "<svg height=\"100\"><line x1=\"0\" y1=\"0\" x2=\"10\" y2=\"0\"/>"
      "<path d=\"M0 0 L5 0 L5 3\"/></svg>";
  const SegmentSet set = parse_vector_document(svg, FigureFormat::svg);
  REQUIRE(set.segments.size() == 3);
  CHECK(set.segments[0].x1 == 0.0);
  CHECK(set.segments[0].x2 == 10.0);
  CHECK(set.segments[0].y2 == 0.0);
  // path expands to two segments sharing (5, 0)
  CHECK(set.segments[1].x2 == 5.0);
  CHECK(set.segments[1].y2 == 0.0);
  CHECK(set.segments[2].x1 == 5.0);
  CHECK(set.segments[2].y1 == 0.0);
  CHECK(set.segments[2].x2 == 5.0);
  CHECK(set.segments[2].y2 == 3.0);
  CHECK(set.page_height == 100.0);
}

TEST_CASE("svg: relative commands, polyline, curves skipped") {
  const std::string svg =
      "<svg><polyline points=\"0,0 4,0 4,2\" stroke=\"#ff0000\"/>"
      "<path d=\"m 1 1 l 2 0 h 3 v 4\"/>"
      "<path d=\"M0 0 C 1 1 2 2 3 3 L 4 3\"/></svg>";
  const SegmentSet set = parse_vector_document(svg, FigureFormat::svg);
  // polyline: 2, second path: 3, third path: 1 (curve skipped, pen moves)
  REQUIRE(set.segments.size() == 6);
  CHECK(set.segments[0].color.has_value());
  CHECK(set.segments[0].color->r == 1.0);
  // relative chain: (1,1)->(3,1)->(6,1)->(6,5)
  CHECK(set.segments[2].x1 == 1.0);
  CHECK(set.segments[3].x2 == 6.0);
  CHECK(set.segments[4].y2 == 5.0);
  // the line after the cubic starts from the curve's endpoint
  CHECK(set.segments[5].x1 == 3.0);
  CHECK(set.segments[5].y1 == 3.0);
}

TEST_CASE("parse errors carry byte offsets; empty input rejected") {
  CHECK_THROWS_WITH_AS(
      parse_vector_document("<svg><line x1=\"1\" y1=", FigureFormat::svg),
      doctest::Contains("parse error at byte"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_vector_document("<svg></svg>", FigureFormat::svg),
                       "no vector content", std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_vector_document("{not json", FigureFormat::segment_interchange),
      doctest::Contains("parse error at byte"), std::invalid_argument);
  CHECK_THROWS_AS(
      parse_vector_document("<svg><path d=\"M0 0 X\"/></svg>",
                            FigureFormat::svg),
      std::invalid_argument);
}

TEST_CASE("assemble: joins at shared endpoints, splits at gaps") {
  SegmentSet set;
  set.segments.push_back({0, 0, 1, 0, {}, {}});
  set.segments.push_back({1, 0, 1, 1, {}, {}});
  auto paths = assemble_paths(set, 1e-6);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].n_segments() == 2);

  SegmentSet gap;
  gap.segments.push_back({0, 0, 1, 0, {}, {}});
  gap.segments.push_back({1.5, 0, 1.5, 1, {}, {}});
  paths = assemble_paths(gap, 1e-6);
  CHECK(paths.size() == 2);
  CHECK(paths[0].n_segments() == 1);
  CHECK(paths[1].n_segments() == 1);
}

TEST_CASE("assemble: staircase plus scattered ticks") {
  SegmentSet set;
  double x = 10.0, y = 10.0;
  for (int i = 0; i < 10; ++i) {
    set.segments.push_back({x, y, x + 5, y, {}, {}});      // tread
    set.segments.push_back({x + 5, y, x + 5, y + 3, {}, {}});  // riser
    x += 5;
    y += 3;
  }
  for (int i = 0; i < 5; ++i) {
    const double tx = 100.0 + 7 * i;
    set.segments.push_back({tx, 80.0, tx, 83.0, {}, {}});
  }
  const auto paths = assemble_paths(set, 1e-6);
  REQUIRE(paths.size() == 6);
  std::vector<std::size_t> counts;
  for (const auto& p : paths) counts.push_back(p.n_segments());
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<std::size_t>{1, 1, 1, 1, 1, 20});
}

TEST_CASE("assemble: non-monotone chain splits at the violation") {
  // staircase that turns back upward (survival would increase)
  SegmentSet set;
  set.segments.push_back({0, 0, 2, 0, {}, {}});
  set.segments.push_back({2, 0, 2, 2, {}, {}});
  set.segments.push_back({2, 2, 4, 2, {}, {}});
  set.segments.push_back({4, 2, 4, 0, {}, {}});  // rises back up
  set.segments.push_back({4, 0, 6, 0, {}, {}});
  const auto paths = assemble_paths(set, 1e-6);
  // the up-riser cannot join either neighbor under any orientation
  REQUIRE(paths.size() == 3);
  std::vector<std::size_t> counts;
  for (const auto& p : paths) counts.push_back(p.n_segments());
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<std::size_t>{1, 1, 3});
}

TEST_CASE("select: top-k by segment count, error when short") {
  SegmentSet set;
  // 3-step staircase (6 segments)
  double x = 0, y = 0;
  for (int i = 0; i < 3; ++i) {
    set.segments.push_back({x, y, x + 2, y, {}, {}});
    set.segments.push_back({x + 2, y, x + 2, y + 1, {}, {}});
    x += 2;
    y += 1;
  }
  // 1-step staircase far away (2 segments)
  set.segments.push_back({20, 0, 22, 0, {}, {}});
  set.segments.push_back({22, 0, 22, 1, {}, {}});
  const auto paths = assemble_paths(set, 1e-6);
  const auto curves = select_km_curves(paths, 2, 1e-6);
  REQUIRE(curves.size() == 2);
  CHECK(curves[0].n_segments == 6);
  CHECK(curves[1].n_segments == 2);
  // steps: start level + one entry per drop
  CHECK(curves[0].steps.size() == 4);
  CHECK(curves[0].steps[1][0] == 2.0);
  CHECK(curves[0].steps[1][1] == 1.0);
  CHECK_THROWS_WITH_AS(select_km_curves(paths, 3, 1e-6),
                       doctest::Contains("candidate paths"),
                       std::invalid_argument);
}

TEST_CASE("to_data_space: affine transform") {
  AxisCalibration calib;
  calib.x_start = 100;
  calib.x_end = 500;
  calib.y_start = 700;
  calib.y_end = 100;
  calib.t_max = 24;
  calib.s_max = 100;
  const auto origin = to_data_space(100, 700, calib);
  CHECK(origin[0] == 0.0);
  CHECK(origin[1] == 0.0);
  const auto mid = to_data_space(300, 700, calib);
  CHECK(mid[0] == doctest::Approx(12.0).epsilon(1e-12));
  const auto half = to_data_space(100, 400, calib);
  CHECK(half[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("detect_axes: nearest rule wins among equal lengths") {
  SegmentSet set;
  // 4-step staircase spanning x 10..50, y 10..30
  double x = 10, y = 10;
  for (int i = 0; i < 4; ++i) {
    set.segments.push_back({x, y, x + 10, y, {}, {}});
    set.segments.push_back({x + 10, y, x + 10, y + 5, {}, {}});
    x += 10;
    y += 5;
  }
  // two horizontal rules of equal length: one mid-figure, one at the bottom
  set.segments.push_back({10, 20, 50, 20, {}, {}});  // gridline
  set.segments.push_back({10, 32, 50, 32, {}, {}});  // axis under the curve
  // vertical rule left of the curve
  set.segments.push_back({10, 32, 10, 12, {}, {}});

  const auto paths = assemble_paths(set, 1e-6);
  const auto curves = select_km_curves(paths, 1, 1e-6);
  const auto calib = detect_axes(set, curves, 0.05, 36.0, 1.0);
  CHECK(calib.y_start == 32.0);  // bottom rule, nearer to the curve bottom
  CHECK(calib.x_start == 10.0);
  CHECK(calib.x_end == 50.0);
  CHECK(calib.y_end == 12.0);

  SegmentSet bare;
  bare.segments = {set.segments[0]};
  CHECK_THROWS_WITH_AS(detect_axes(bare, curves, 0.05, 36.0, 1.0),
                       doctest::Contains("axis not found"),
                       std::invalid_argument);
}

namespace {

PageStepCurve flat_curve(double x0, double x1, double level,
                         std::optional<Rgb> color) {
  PageStepCurve c;
  c.steps = {{x0, level}};
  c.color = color;
  c.min_x = x0;
  c.max_x = x1;
  c.min_y = level;
  c.max_y = level;
  c.n_segments = 1;
  return c;
}

}  // namespace

TEST_CASE("censor marks: assignment, color ties, crosses, strays") {
  AxisCalibration calib;
  calib.x_start = 0;
  calib.x_end = 100;
  calib.y_start = 400;
  calib.y_end = 0;
  calib.t_max = 10;
  calib.s_max = 1;

  const Rgb red{1, 0, 0};
  const Rgb blue{0, 0, 1};
  std::vector<PageStepCurve> curves = {flat_curve(0, 100, 100.0, blue),
                                       flat_curve(0, 100, 104.0, red)};

  CensorMarkConfig cfg;  // yspan 400: len bounds [0.8, 16], assign_tol 4
  SegmentSet set;
  // tick exactly on curve 0
  set.segments.push_back({50, 97, 50, 103, Rgb{0, 0, 1}, {}});
  // tick equidistant between the two curves, colored like curve 1
  set.segments.push_back({60, 99, 60, 105, Rgb{1, 0, 0}, {}});
  // cross: two short segments sharing a center near curve 1
  set.segments.push_back({70, 101, 70, 107, Rgb{1, 0, 0}, {}});
  set.segments.push_back({67, 104, 73, 104, Rgb{1, 0, 0}, {}});
  // stray vertical tick far below both curves (axis tick)
  set.segments.push_back({80, 396, 80, 402, {}, {}});
  // lone short horizontal far away: not a mark at all
  set.segments.push_back({20, 300, 26, 300, {}, {}});

  const auto det = detect_censor_marks(set, curves, calib, cfg);
  REQUIRE(det.per_curve_times.size() == 2);
  REQUIRE(det.per_curve_times[0].size() == 1);
  CHECK(det.per_curve_times[0][0] == doctest::Approx(5.0).epsilon(1e-12));
  // color broke the tie toward curve 1; the cross merged into one mark
  REQUIRE(det.per_curve_times[1].size() == 2);
  CHECK(det.per_curve_times[1][0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(det.per_curve_times[1][1] == doctest::Approx(7.0).epsilon(1e-12));
  // only the stray axis-like tick lands in unassigned
  CHECK(det.unassigned.size() == 1);
  CHECK(det.unassigned[0].x1 == 80.0);
}

TEST_CASE("extract: renderer round trip recovers curves exactly") {
  Rng rng(424242);
  SimConfig sim;
  sim.n_total = 120;
  sim.n_group0 = 60;
  const IpdSet ipd = generate_trial(sim, rng);
  const IpdSet ctrl = slice_arm(ipd, Arm::control);
  const IpdSet treat = slice_arm(ipd, Arm::treatment);
  const StepCurve km_ctrl = km_estimate(ctrl);
  const StepCurve km_treat = km_estimate(treat);

  double t_max = 0.0;
  for (const auto& r : ipd.records) t_max = std::max(t_max, r.time);
  t_max = std::ceil(t_max);

  RenderStyle style;
  const std::string svg =
      render_km_svg({km_ctrl, km_treat}, t_max, style);
  const SegmentSet set = parse_vector_document(svg, FigureFormat::svg);

  ExtractionConfig cfg;
  cfg.k_curves = 2;
  cfg.t_max = t_max;
  cfg.span_tol = 0.3;  // synthetic curves stop well above survival zero
  cfg.n_initial = {static_cast<int>(ctrl.size()),
                   static_cast<int>(treat.size())};
  const ExtractedFigure fig = extract_figure(set, cfg);
  REQUIRE(fig.curves.size() == 2);

  // calibration equals the renderer's anchors exactly
  CHECK(fig.calibration.x_start == style.x_left);
  CHECK(fig.calibration.x_end == style.x_right);
  CHECK(fig.calibration.y_start == style.y_bottom);
  CHECK(fig.calibration.y_end == style.y_top);
  CHECK(fig.unassigned_marks.empty());

  // match extracted curves to arms by color
  const auto& c0 = style.curve_colors[0];
  int idx_ctrl = -1, idx_treat = -1;
  for (int i = 0; i < 2; ++i) {
    REQUIRE(fig.curve_colors[i].has_value());
    if (std::fabs(fig.curve_colors[i]->r - c0.r) < 0.01 &&
        std::fabs(fig.curve_colors[i]->g - c0.g) < 0.01 &&
        std::fabs(fig.curve_colors[i]->b - c0.b) < 0.01) {
      idx_ctrl = i;
    } else {
      idx_treat = i;
    }
  }
  REQUIRE(idx_ctrl >= 0);
  REQUIRE(idx_treat >= 0);

  auto check_curve = [&](const StepCurve& got, const StepCurve& want) {
    // first extracted point restates the starting level
    REQUIRE(got.points.size() == want.points.size() + 1);
    CHECK(got.points[0].time == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(got.points[0].survival == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t i = 0; i < want.points.size(); ++i) {
      CHECK(got.points[i + 1].time ==
            doctest::Approx(want.points[i].time).epsilon(1e-9));
      CHECK(got.points[i + 1].survival ==
            doctest::Approx(want.points[i].survival).epsilon(1e-9));
    }
    std::vector<double> want_censors = want.censor_times;
    std::sort(want_censors.begin(), want_censors.end());
    REQUIRE(got.censor_times.size() == want_censors.size());
    for (std::size_t i = 0; i < want_censors.size(); ++i) {
      CHECK(got.censor_times[i] ==
            doctest::Approx(want_censors[i]).epsilon(1e-9));
    }
  };
  check_curve(fig.curves[idx_ctrl], km_ctrl);
  check_curve(fig.curves[idx_treat], km_treat);

  // selection is invariant to segment shuffling
  SegmentSet shuffled = set;
  Rng shuffle_rng(99);
  shuffle_rng.shuffle(shuffled.segments);
  const ExtractedFigure fig2 = extract_figure(shuffled, cfg);
  REQUIRE(fig2.curves.size() == 2);
  for (int i = 0; i < 2; ++i) {
    REQUIRE(fig2.curves[i].points.size() == fig.curves[i].points.size());
    for (std::size_t p = 0; p < fig.curves[i].points.size(); ++p) {
      CHECK(fig2.curves[i].points[p].time == fig.curves[i].points[p].time);
      CHECK(fig2.curves[i].points[p].survival ==
            fig.curves[i].points[p].survival);
    }
    CHECK(fig2.curves[i].censor_times == fig.curves[i].censor_times);
  }
}

TEST_CASE("extract: survival levels stay in [0, 1+1e-9], non-increasing") {
  Rng rng(777);
  SimConfig sim;
  sim.n_total = 80;
  sim.n_group0 = 40;
  const IpdSet ipd = generate_trial(sim, rng);
  const StepCurve km = km_estimate(ipd);
  RenderStyle style;
  const std::string svg = render_km_svg({km}, 30.0, style);
  const SegmentSet set = parse_vector_document(svg, FigureFormat::svg);
  ExtractionConfig cfg;
  cfg.k_curves = 1;
  cfg.t_max = 30.0;
  cfg.span_tol = 0.3;
  const ExtractedFigure fig = extract_figure(set, cfg);
  double prev = 1.0 + 1e-9;
  for (const auto& p : fig.curves[0].points) {
    CHECK(p.survival >= 0.0);
    CHECK(p.survival <= 1.0 + 1e-9);
    CHECK(p.survival <= prev + 1e-9);
    prev = p.survival;
  }
}
