#pragma once

#include <limits>
#include <string>
#include <vector>

namespace kmrecon {

struct CurvePoint {
  double time = 0.0;
  double survival = 1.0;
  // Greenwood variance of the estimate at this point; NaN when the curve was
  // not produced by an estimator (e.g. digitized from a figure).
  double variance = std::numeric_limits<double>::quiet_NaN();
};

// Monotone non-increasing step function with attached censor-mark times.
// Right-continuous: the value at a point's time is the post-drop level, and
// the value before the first point is 1.
struct StepCurve {
  std::vector<CurvePoint> points;
  std::vector<double> censor_times;
  int n_initial = 0;

  bool has_variance() const;
  double max_time() const;
};

// Throws std::invalid_argument when times are not strictly increasing or
// survival values leave [0, 1] / increase beyond tolerance.
void validate(const StepCurve& curve, double tol = 1e-9);

double step_eval(const StepCurve& curve, double t);

// Curve JSON: {"points":[[t,s],...], "censor_times":[...], "n_initial":N}
// plus an optional "variance" array parallel to points.
std::string curve_to_json(const StepCurve& curve);
StepCurve curve_from_json(const std::string& text);

void write_curve_json(const std::string& path, const StepCurve& curve);
StepCurve read_curve_json(const std::string& path);

}  // namespace kmrecon
