#include "kmrecon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kmrecon/format.hpp"

namespace kmrecon {

IpdSet generate_trial(const SimConfig& cfg, Rng& rng) {
  if (cfg.n_total < 1 || cfg.n_group0 < 0 || cfg.n_group0 > cfg.n_total) {
    throw std::invalid_argument("bad group sizes");
  }
  if (!(cfg.baseline_hazard > 0.0)) {
    throw std::invalid_argument("baseline hazard must be positive");
  }
  IpdSet out;
  out.provenance = "synthetic";
  out.records.reserve(cfg.n_total);
  for (int i = 0; i < cfg.n_total; ++i) {
    const int g = i < cfg.n_group0 ? 0 : 1;
    const bool treated = rng.bernoulli(cfg.treat_prob);
    const double hr = g == 0 ? cfg.hr_g0 : cfg.hr_g1;
    const double rate = cfg.baseline_hazard * (treated ? hr : 1.0);
    const double t = rng.exponential(rate);
    const double c = rng.bernoulli(cfg.censor_late_weight)
                         ? rng.uniform(cfg.censor_late_lo, cfg.censor_late_hi)
                         : rng.uniform(cfg.censor_early_lo, cfg.censor_early_hi);
    IpdRecord r;
    r.time = std::min(t, c);
    r.event = t <= c;
    r.arm = treated ? Arm::treatment : Arm::control;
    r.label = g;
    out.records.push_back(r);
  }
  return out;
}

std::array<double, 2> render_point(double t, double s, double t_max,
                                   const RenderStyle& style) {
  const double x =
      style.x_left + t / t_max * (style.x_right - style.x_left);
  const double y = style.y_bottom - s * (style.y_bottom - style.y_top);
  return {x, y};
}

namespace {

std::string hex_color(const Rgb& c) {
  auto channel = [](double v) {
    int i = static_cast<int>(std::lround(v * 255.0));
    i = std::clamp(i, 0, 255);
    char buf[3];
    static const char* digits = "0123456789abcdef";
    buf[0] = digits[i / 16];
    buf[1] = digits[i % 16];
    buf[2] = 0;
    return std::string(buf);
  };
  return "#" + channel(c.r) + channel(c.g) + channel(c.b);
}

void emit_line(std::ostringstream& svg, double x1, double y1, double x2,
               double y2, const std::string& color, double width) {
  svg << "  <line x1=\"" << format_double(x1) << "\" y1=\"" << format_double(y1)
      << "\" x2=\"" << format_double(x2) << "\" y2=\"" << format_double(y2)
      << "\" stroke=\"" << color << "\" stroke-width=\""
      << format_double(width) << "\"/>\n";
}

}  // namespace

std::string render_km_svg(const std::vector<StepCurve>& curves, double t_max,
                          const RenderStyle& style) {
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  if (style.curve_colors.empty()) {
    throw std::invalid_argument("style needs at least one curve color");
  }
  for (const auto& c : curves) validate(c);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << format_double(style.width) << "\" height=\""
      << format_double(style.height) << "\">\n";

  // axis rules: time along the bottom, survival up the left side
  emit_line(svg, style.x_left, style.y_bottom, style.x_right, style.y_bottom,
            "#000000", style.axis_stroke_width);
  emit_line(svg, style.x_left, style.y_bottom, style.x_left, style.y_top,
            "#000000", style.axis_stroke_width);

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const StepCurve& curve = curves[ci];
    const std::string color =
        hex_color(style.curve_colors[ci % style.curve_colors.size()]);

    std::ostringstream d;
    double level = 1.0;
    auto p0 = render_point(0.0, level, t_max, style);
    d << "M " << format_double(p0[0]) << " " << format_double(p0[1]);
    for (const auto& pt : curve.points) {
      if (pt.time > t_max) break;
      const auto tread = render_point(pt.time, level, t_max, style);
      const auto drop = render_point(pt.time, pt.survival, t_max, style);
      d << " L " << format_double(tread[0]) << " " << format_double(tread[1]);
      d << " L " << format_double(drop[0]) << " " << format_double(drop[1]);
      level = pt.survival;
    }
    const auto end = render_point(t_max, level, t_max, style);
    d << " L " << format_double(end[0]) << " " << format_double(end[1]);
    svg << "  <path d=\"" << d.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"" << format_double(style.curve_stroke_width)
        << "\"/>\n";

    for (double ct : curve.censor_times) {
      if (ct < 0.0 || ct > t_max) continue;
      const double s = step_eval(curve, ct);
      const auto center = render_point(ct, s, t_max, style);
      emit_line(svg, center[0], center[1] - style.tick_half_height, center[0],
                center[1] + style.tick_half_height, color,
                style.curve_stroke_width);
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace kmrecon
