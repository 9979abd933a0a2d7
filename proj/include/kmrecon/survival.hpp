#pragma once

#include <optional>
#include <span>

#include "kmrecon/ipd.hpp"
#include "kmrecon/step_curve.hpp"

namespace kmrecon {

// Two-sided 95% normal quantile used for every published-style CI.
inline constexpr double kZ95 = 1.959964;

// Normal quantile for arbitrary levels (Wichura's AS241, double precision).
double normal_quantile(double p);

// Months or "not reached" (no crossing of the 0.5 line).
struct MedianEstimate {
  std::optional<double> point;
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
};

struct HazardRatioEstimate {
  double hr = 1.0;
  double ci_lower = 1.0;
  double ci_upper = 1.0;
  double log_se = 0.0;
};

// Product-limit estimator with Greenwood variance. The returned curve has a
// point at every distinct event time and carries all censored times.
StepCurve km_estimate(std::span<const IpdRecord> records);
StepCurve km_estimate(const IpdSet& ipd);

// Point = earliest time with S(t) <= 0.5. CI bounds are the earliest times at
// which the pointwise log(-log) bands cross 0.5 (Brookmeyer-Crowley style).
MedianEstimate median_survival(const StepCurve& curve, double level = 0.95);

// Two-group Cox partial likelihood (arm indicator as the only covariate),
// Efron tie correction, safeguarded Newton with bisection fallback. Wald CI
// on the log scale. Throws on single-arm input, no events, or monotone
// likelihood ("HR diverges").
HazardRatioEstimate cox_two_group(std::span<const IpdRecord> records);
HazardRatioEstimate cox_two_group(const IpdSet& ipd);

// Efron-corrected log partial likelihood and derivatives at log-HR beta;
// exposed for the solver and for independent grid checks.
struct CoxDerivatives {
  double loglik;
  double gradient;
  double hessian;
};
CoxDerivatives cox_partial_loglik(std::span<const IpdRecord> records,
                                  double beta);

// RMSE of the two step functions at 100 evenly spaced points on [0, t_max].
double curve_rmse(const StepCurve& a, const StepCurve& b, double t_max);

// Pointwise log(-log) transformed bands at `level`, clipped to [0, 1].
// Requires Greenwood variances on the curve.
struct ConfidenceBand {
  StepCurve lower;
  StepCurve upper;
};
ConfidenceBand confidence_band(const StepCurve& curve, double level = 0.95);

// Publication-precision rounding (months to 1 decimal, HRs to 2); half away
// from zero.
double round_to_decimals(double x, int decimals);

}  // namespace kmrecon
