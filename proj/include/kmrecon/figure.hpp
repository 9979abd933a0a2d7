#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "kmrecon/step_curve.hpp"

namespace kmrecon {

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// One straight drawing primitive in page coordinates (y grows downward).
struct Segment {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  std::optional<Rgb> color;
  std::optional<double> width;

  double length() const;
};

struct SegmentSet {
  std::vector<Segment> segments;
  double page_height = 0.0;
};

enum class FigureFormat { svg, segment_interchange };

// Decodes every straight-line primitive into a Segment; curved path commands
// are skipped (endpoint tracking only). Throws std::invalid_argument with a
// byte offset on malformed input, or "no vector content" when nothing was
// drawn.
SegmentSet parse_vector_document(const std::string& bytes, FigureFormat fmt);

// A maximal chain of joined segments that respects staircase monotonicity
// (x non-decreasing, page y non-decreasing); chains are split wherever the
// monotonicity breaks. Vertices are in walk order.
struct PagePolyline {
  std::vector<std::array<double, 2>> vertices;
  std::vector<std::size_t> segment_ids;  // indices into SegmentSet.segments
  std::optional<Rgb> color;

  std::size_t n_segments() const { return segment_ids.size(); }
};

std::vector<PagePolyline> assemble_paths(const SegmentSet& segs,
                                         double join_tol);

// Page-space step curve: starting level plus (x of drop, y after drop).
struct PageStepCurve {
  std::vector<std::array<double, 2>> steps;
  std::vector<std::size_t> segment_ids;
  std::optional<Rgb> color;
  std::size_t n_segments = 0;
  double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;

  // Right-continuous level at page x; only defined on [min_x, max_x].
  double level_at(double x) const;
};

// The k paths with the most segments, converted to step form. Throws when
// fewer than k candidates exist (message lists the candidate counts).
std::vector<PageStepCurve> select_km_curves(
    const std::vector<PagePolyline>& paths, int k_curves, double join_tol);

struct AxisCalibration {
  double x_start = 0.0;  // page x of time zero
  double x_end = 1.0;    // page x of t_max
  double y_start = 1.0;  // page y of survival zero (bottom)
  double y_end = 0.0;    // page y of survival s_max (top)
  double t_max = 1.0;
  double s_max = 1.0;
};

// Axis rules are the horizontal/vertical segments whose length matches the
// curves' joint span within span_tol (relative) and that lie nearest the
// curves in perpendicular distance.
AxisCalibration detect_axes(const SegmentSet& segs,
                            const std::vector<PageStepCurve>& curves,
                            double span_tol, double t_max, double s_max);

std::array<double, 2> to_data_space(double x, double y,
                                    const AxisCalibration& calib);

struct CensorMarkConfig {
  double min_len_frac = 0.002;  // of y-axis span
  double max_len_frac = 0.04;
  double assign_frac = 0.01;
  double join_tol = 1e-6;
};

struct CensorDetection {
  std::vector<std::vector<double>> per_curve_times;  // months, ascending
  std::vector<Segment> unassigned;
};

CensorDetection detect_censor_marks(const SegmentSet& segs,
                                    const std::vector<PageStepCurve>& curves,
                                    const AxisCalibration& calib,
                                    const CensorMarkConfig& cfg);

struct ExtractionConfig {
  int k_curves = 1;
  double t_max = 1.0;
  double s_max = 1.0;
  double join_tol = 1e-6;
  double span_tol = 0.02;
  CensorMarkConfig censor;
  std::vector<int> n_initial;  // per curve, in output order; optional
};

struct ExtractedFigure {
  std::vector<StepCurve> curves;  // data space
  std::vector<std::optional<Rgb>> curve_colors;
  AxisCalibration calibration;
  std::vector<Segment> unassigned_marks;
  std::size_t n_segments = 0;
  std::size_t n_paths = 0;
};

ExtractedFigure extract_figure(const SegmentSet& segs,
                               const ExtractionConfig& cfg);

// Extraction report JSON (counts, calibration, per-curve summaries,
// unassigned marks).
std::string extraction_report_json(const ExtractedFigure& fig);

}  // namespace kmrecon
