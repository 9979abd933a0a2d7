#include "kmrecon/step_curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kmrecon {

bool StepCurve::has_variance() const {
  if (points.empty()) return false;
  for (const auto& p : points) {
    if (std::isnan(p.variance)) return false;
  }
  return true;
}

double StepCurve::max_time() const {
  double t = 0.0;
  if (!points.empty()) t = points.back().time;
  for (double c : censor_times) t = std::max(t, c);
  return t;
}

void validate(const StepCurve& curve, double tol) {
  double prev_t = -std::numeric_limits<double>::infinity();
  double prev_s = 1.0 + tol;
  for (const auto& p : curve.points) {
    if (!std::isfinite(p.time) || !std::isfinite(p.survival)) {
      throw std::invalid_argument("non-finite curve point");
    }
    if (p.time <= prev_t) {
      throw std::invalid_argument("curve times not strictly increasing");
    }
    if (p.survival < -tol || p.survival > 1.0 + tol) {
      throw std::invalid_argument("survival outside [0,1]");
    }
    if (p.survival > prev_s + tol) {
      throw std::invalid_argument("survival increases along curve");
    }
    prev_t = p.time;
    prev_s = p.survival;
  }
}

double step_eval(const StepCurve& curve, double t) {
  double s = 1.0;
  for (const auto& p : curve.points) {
    if (p.time > t) break;
    s = p.survival;
  }
  return s;
}

std::string curve_to_json(const StepCurve& curve) {
  nlohmann::json j;
  j["points"] = nlohmann::json::array();
  for (const auto& p : curve.points) {
    j["points"].push_back({p.time, p.survival});
  }
  j["censor_times"] = curve.censor_times;
  j["n_initial"] = curve.n_initial;
  if (curve.has_variance()) {
    std::vector<double> v;
    v.reserve(curve.points.size());
    for (const auto& p : curve.points) v.push_back(p.variance);
    j["variance"] = v;
  }
  return j.dump(2) + "\n";
}

StepCurve curve_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("curve JSON: ") + e.what());
  }
  StepCurve c;
  for (const auto& p : j.at("points")) {
    CurvePoint cp;
    cp.time = p.at(0).get<double>();
    cp.survival = p.at(1).get<double>();
    c.points.push_back(cp);
  }
  if (j.contains("censor_times")) {
    c.censor_times = j["censor_times"].get<std::vector<double>>();
  }
  c.n_initial = j.value("n_initial", 0);
  if (j.contains("variance")) {
    auto v = j["variance"].get<std::vector<double>>();
    if (v.size() != c.points.size()) {
      throw std::invalid_argument("variance array length mismatch");
    }
    for (std::size_t i = 0; i < v.size(); ++i) c.points[i].variance = v[i];
  }
  return c;
}

void write_curve_json(const std::string& path, const StepCurve& curve) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << curve_to_json(curve);
}

StepCurve read_curve_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return curve_from_json(ss.str());
}

}  // namespace kmrecon
