#pragma once

#include <string>
#include <vector>

#include "kmrecon/figure.hpp"
#include "kmrecon/ipd.hpp"
#include "kmrecon/rng.hpp"
#include "kmrecon/step_curve.hpp"

namespace kmrecon {

// Two-subgroup randomized trial with exponential event times and a mixture
// censoring pattern (mostly administrative, some early dropout).
struct SimConfig {
  int n_total = 400;
  int n_group0 = 200;  // subgroup 0 size; the rest is subgroup 1
  double baseline_hazard = 0.1;  // per month
  double hr_g0 = 0.9;
  double hr_g1 = 0.7;
  double treat_prob = 0.5;
  double censor_late_weight = 0.9;  // Uniform(12,24) component
  double censor_late_lo = 12.0, censor_late_hi = 24.0;
  double censor_early_lo = 0.0, censor_early_hi = 12.0;
};

// Draw order per subject: arm, event-time uniform, mixture choice, censor
// uniform. Fixed so a seed pins the dataset bit-for-bit.
IpdSet generate_trial(const SimConfig& cfg, Rng& rng);

struct RenderStyle {
  double width = 640.0, height = 480.0;
  double x_left = 80.0, x_right = 600.0;   // page x of t = 0 and t = t_max
  double y_bottom = 420.0, y_top = 40.0;   // page y of s = 0 and s = 1
  double tick_half_height = 5.0;
  double axis_stroke_width = 1.0;
  double curve_stroke_width = 1.5;
  std::vector<Rgb> curve_colors = {Rgb{31 / 255.0, 119 / 255.0, 180 / 255.0},
                                   Rgb{255 / 255.0, 127 / 255.0, 14 / 255.0},
                                   Rgb{44 / 255.0, 160 / 255.0, 44 / 255.0}};
};

// Steps drawn horizontal-then-vertical, one tick per censor time, two axis
// rules, final tread extended to t_max. Coordinates are written shortest
// round-trip, so parsing the output recovers every vertex bit-for-bit.
std::string render_km_svg(const std::vector<StepCurve>& curves, double t_max,
                          const RenderStyle& style);

// Forward map used by the renderer; exposed for round-trip tests.
std::array<double, 2> render_point(double t, double s, double t_max,
                                   const RenderStyle& style);

}  // namespace kmrecon
