#include "kmrecon/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace kmrecon {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p outside (0,1)");
  }
  // Wichura's AS241 (PPND16), accurate to ~1e-16 over the full range.
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

StepCurve km_estimate(std::span<const IpdRecord> records) {
  if (records.empty()) throw std::invalid_argument("no subjects");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].time < records[b].time;
  });

  StepCurve curve;
  curve.n_initial = static_cast<int>(records.size());

  double survival = 1.0;
  double greenwood = 0.0;
  std::size_t at_risk = records.size();
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = records[order[i]].time;
    std::size_t d = 0, c = 0;
    std::size_t j = i;
    while (j < order.size() && records[order[j]].time == t) {
      if (records[order[j]].event) {
        ++d;
      } else {
        ++c;
        curve.censor_times.push_back(t);
      }
      ++j;
    }
    if (d > 0) {
      const double n = static_cast<double>(at_risk);
      survival *= 1.0 - static_cast<double>(d) / n;
      if (at_risk > d) {
        greenwood += static_cast<double>(d) / (n * static_cast<double>(at_risk - d));
      } else {
        greenwood = std::numeric_limits<double>::infinity();
      }
      CurvePoint p;
      p.time = t;
      p.survival = survival;
      p.variance = survival > 0.0 ? survival * survival * greenwood : 0.0;
      curve.points.push_back(p);
    }
    at_risk -= d + c;
    i = j;
  }
  return curve;
}

StepCurve km_estimate(const IpdSet& ipd) {
  return km_estimate(std::span<const IpdRecord>(ipd.records));
}

MedianEstimate median_survival(const StepCurve& curve, double level) {
  MedianEstimate est;
  for (const auto& p : curve.points) {
    if (p.survival <= 0.5) {
      est.point = p.time;
      break;
    }
  }
  if (curve.has_variance()) {
    const ConfidenceBand band = confidence_band(curve, level);
    for (const auto& p : band.lower.points) {
      if (p.survival <= 0.5) {
        est.ci_lower = p.time;
        break;
      }
    }
    for (const auto& p : band.upper.points) {
      if (p.survival <= 0.5) {
        est.ci_upper = p.time;
        break;
      }
    }
  }
  return est;
}

namespace {

// Risk-set and event-tie summaries at one event time, ordered ascending.
struct EventGroup {
  double n_control;  // at risk, control arm
  double n_treat;    // at risk, treatment arm
  double d;          // events at this time
  double d_treat;    // treatment events at this time
};

std::vector<EventGroup> build_event_groups(std::span<const IpdRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].time > records[b].time;
  });

  std::vector<EventGroup> groups;
  double n0 = 0.0, n1 = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = records[order[i]].time;
    double d = 0.0, d1 = 0.0;
    std::size_t j = i;
    while (j < order.size() && records[order[j]].time == t) {
      const auto& r = records[order[j]];
      if (r.arm == Arm::treatment) {
        n1 += 1.0;
      } else {
        n0 += 1.0;
      }
      if (r.event) {
        d += 1.0;
        if (r.arm == Arm::treatment) d1 += 1.0;
      }
      ++j;
    }
    if (d > 0.0) groups.push_back({n0, n1, d, d1});
    i = j;
  }
  std::reverse(groups.begin(), groups.end());
  return groups;
}

CoxDerivatives efron_derivatives(const std::vector<EventGroup>& groups,
                                 double beta) {
  const double eb = std::exp(beta);
  CoxDerivatives out{0.0, 0.0, 0.0};
  for (const auto& g : groups) {
    const double s0 = g.n_control + g.n_treat * eb;
    const double s1 = g.n_treat * eb;
    const double s0d = (g.d - g.d_treat) + g.d_treat * eb;
    const double s1d = g.d_treat * eb;
    out.loglik += beta * g.d_treat;
    for (double l = 0.0; l < g.d; l += 1.0) {
      const double f = l / g.d;
      const double a0 = s0 - f * s0d;
      const double a1 = s1 - f * s1d;
      const double ratio = a1 / a0;
      out.loglik -= std::log(a0);
      out.gradient += -ratio;
      out.hessian -= ratio * (1.0 - ratio);
    }
    out.gradient += g.d_treat;
  }
  return out;
}

}  // namespace

CoxDerivatives cox_partial_loglik(std::span<const IpdRecord> records,
                                  double beta) {
  return efron_derivatives(build_event_groups(records), beta);
}

HazardRatioEstimate cox_two_group(std::span<const IpdRecord> records) {
  bool has_control = false, has_treat = false, has_event = false;
  for (const auto& r : records) {
    if (r.arm == Arm::treatment) {
      has_treat = true;
    } else {
      has_control = true;
    }
    has_event |= r.event;
  }
  if (!has_control || !has_treat) {
    throw std::invalid_argument("single-arm input");
  }
  if (!has_event) throw std::invalid_argument("no events");

  const auto groups = build_event_groups(records);

  // Safeguarded Newton on the score; gradient brackets shrink by bisection
  // whenever a Newton step misbehaves.
  const double diverge_at = 30.0;
  double beta = 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  CoxDerivatives d = efron_derivatives(groups, beta);
  for (int iter = 0; iter < 200; ++iter) {
    if (std::fabs(d.gradient) < 1e-11) break;
    if (d.gradient > 0.0) {
      lo = beta;
    } else {
      hi = beta;
    }
    double next;
    if (d.hessian < 0.0) {
      next = beta - d.gradient / d.hessian;
    } else {
      next = beta + (d.gradient > 0.0 ? 1.0 : -1.0);
    }
    if (!(next > lo && next < hi)) {
      if (std::isinf(lo)) {
        next = hi - std::max(1.0, 2.0 * std::fabs(hi));
      } else if (std::isinf(hi)) {
        next = lo + std::max(1.0, 2.0 * std::fabs(lo));
      } else {
        next = 0.5 * (lo + hi);
      }
    }
    if (std::fabs(next) > diverge_at) throw std::runtime_error("HR diverges");
    if (next == beta) break;
    beta = next;
    d = efron_derivatives(groups, beta);
  }
  // Monotone likelihood flattens the score instead of crossing zero; an
  // estimate this far out is separation, not an effect.
  if (std::fabs(d.gradient) > 1e-6 || std::fabs(beta) > 15.0) {
    throw std::runtime_error("HR diverges");
  }

  HazardRatioEstimate est;
  est.log_se = 1.0 / std::sqrt(-d.hessian);
  est.hr = std::exp(beta);
  est.ci_lower = std::exp(beta - kZ95 * est.log_se);
  est.ci_upper = std::exp(beta + kZ95 * est.log_se);
  return est;
}

HazardRatioEstimate cox_two_group(const IpdSet& ipd) {
  return cox_two_group(std::span<const IpdRecord>(ipd.records));
}

double curve_rmse(const StepCurve& a, const StepCurve& b, double t_max) {
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  const int n = 100;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = t_max * static_cast<double>(i) / (n - 1);
    const double diff = step_eval(a, t) - step_eval(b, t);
    sum2 += diff * diff;
  }
  return std::sqrt(sum2 / n);
}

ConfidenceBand confidence_band(const StepCurve& curve, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("level outside (0,1)");
  }
  if (!curve.has_variance()) {
    throw std::invalid_argument("curve carries no variance");
  }
  const double z = level == 0.95 ? kZ95 : normal_quantile(0.5 + level / 2.0);

  ConfidenceBand band;
  band.lower = curve;
  band.upper = curve;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const double s = curve.points[i].survival;
    const double var = curve.points[i].variance;
    double lo, hi;
    if (var == 0.0) {
      lo = hi = s;
    } else if (s <= 0.0) {
      lo = hi = 0.0;
    } else if (s >= 1.0) {
      lo = hi = 1.0;
    } else {
      const double log_s = std::log(s);
      const double se_loglog = std::sqrt(var) / (s * std::fabs(log_s));
      const double theta = std::log(-log_s);
      lo = std::exp(-std::exp(theta + z * se_loglog));
      hi = std::exp(-std::exp(theta - z * se_loglog));
      lo = std::clamp(lo, 0.0, 1.0);
      hi = std::clamp(hi, 0.0, 1.0);
    }
    band.lower.points[i].survival = lo;
    band.upper.points[i].survival = hi;
    band.lower.points[i].variance = std::numeric_limits<double>::quiet_NaN();
    band.upper.points[i].variance = std::numeric_limits<double>::quiet_NaN();
  }
  return band;
}

double round_to_decimals(double x, int decimals) {
  const double p = std::pow(10.0, decimals);
  return std::round(x * p) / p;
}

}  // namespace kmrecon
