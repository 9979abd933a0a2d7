#include "kmrecon/figure.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kmrecon {

double Segment::length() const { return std::hypot(x2 - x1, y2 - y1); }

namespace {

[[noreturn]] void parse_fail(std::size_t offset, const std::string& what) {
  throw std::invalid_argument("parse error at byte " + std::to_string(offset) +
                              ": " + what);
}

// ---------------------------------------------------------------------------
// segment interchange (JSON)
// ---------------------------------------------------------------------------

SegmentSet parse_interchange(const std::string& bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    parse_fail(e.byte, "invalid JSON");
  }
  SegmentSet out;
  if (!j.is_object() || !j.contains("segments")) {
    parse_fail(0, "expected object with a 'segments' array");
  }
  out.page_height = j.value("page_height", 0.0);
  for (const auto& s : j["segments"]) {
    Segment seg;
    try {
      seg.x1 = s.at("x1").get<double>();
      seg.y1 = s.at("y1").get<double>();
      seg.x2 = s.at("x2").get<double>();
      seg.y2 = s.at("y2").get<double>();
    } catch (const nlohmann::json::exception&) {
      parse_fail(0, "segment entry missing x1/y1/x2/y2");
    }
    if (s.contains("rgb") && !s["rgb"].is_null()) {
      const auto& c = s["rgb"];
      if (!c.is_array() || c.size() != 3) parse_fail(0, "rgb must be [r,g,b]");
      seg.color =
          Rgb{c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
    }
    if (s.contains("width") && !s["width"].is_null()) {
      seg.width = s["width"].get<double>();
    }
    out.segments.push_back(seg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG subset scanner: line, polyline, path (M/L/H/V absolute and relative,
// Z close). Curved commands advance the pen without emitting segments.
// ---------------------------------------------------------------------------

struct SvgScanner {
  const std::string& text;
  std::size_t pos = 0;
  SegmentSet out;

  explicit SvgScanner(const std::string& t) : text(t) {}

  bool eof() const { return pos >= text.size(); }

  void skip_until(const std::string& token) {
    const std::size_t found = text.find(token, pos);
    if (found == std::string::npos) parse_fail(pos, "unterminated " + token);
    pos = found + token.size();
  }

  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
           c == '_' || c == ':';
  }

  void run() {
    while (!eof()) {
      const std::size_t lt = text.find('<', pos);
      if (lt == std::string::npos) break;
      pos = lt + 1;
      if (text.compare(pos, 3, "!--") == 0) {
        skip_until("-->");
      } else if (!eof() && (text[pos] == '?' || text[pos] == '!')) {
        skip_until(">");
      } else if (!eof() && text[pos] == '/') {
        skip_until(">");
      } else {
        read_element();
      }
    }
  }

  void read_element() {
    const std::size_t name_start = pos;
    while (!eof() && name_char(text[pos])) ++pos;
    if (pos == name_start) parse_fail(pos, "expected element name");
    const std::string name = text.substr(name_start, pos - name_start);

    std::map<std::string, std::string> attrs;
    for (;;) {
      while (!eof() && std::isspace(static_cast<unsigned char>(text[pos])))
        ++pos;
      if (eof()) parse_fail(pos, "unterminated element <" + name + ">");
      if (text[pos] == '>') {
        ++pos;
        break;
      }
      if (text[pos] == '/') {
        ++pos;
        if (eof() || text[pos] != '>') parse_fail(pos, "expected '>'");
        ++pos;
        break;
      }
      const std::size_t astart = pos;
      while (!eof() && name_char(text[pos])) ++pos;
      if (pos == astart) parse_fail(pos, "expected attribute name");
      const std::string aname = text.substr(astart, pos - astart);
      while (!eof() && std::isspace(static_cast<unsigned char>(text[pos])))
        ++pos;
      if (eof() || text[pos] != '=') parse_fail(pos, "expected '='");
      ++pos;
      while (!eof() && std::isspace(static_cast<unsigned char>(text[pos])))
        ++pos;
      if (eof() || (text[pos] != '"' && text[pos] != '\'')) {
        parse_fail(pos, "expected quoted attribute value");
      }
      const char quote = text[pos++];
      const std::size_t vstart = pos;
      const std::size_t vend = text.find(quote, pos);
      if (vend == std::string::npos) parse_fail(vstart, "unterminated value");
      attrs[aname] = text.substr(vstart, vend - vstart);
      pos = vend + 1;
    }

    if (name == "svg") {
      auto it = attrs.find("height");
      if (it != attrs.end()) out.page_height = leading_number(it->second);
    } else if (name == "line") {
      Segment s;
      s.x1 = attr_number(attrs, "x1");
      s.y1 = attr_number(attrs, "y1");
      s.x2 = attr_number(attrs, "x2");
      s.y2 = attr_number(attrs, "y2");
      apply_stroke(s, attrs);
      push(s);
    } else if (name == "polyline") {
      read_polyline(attrs);
    } else if (name == "path") {
      read_path(attrs);
    }
    // other elements carry no straight-line primitives in this subset
  }

  double attr_number(const std::map<std::string, std::string>& attrs,
                     const char* key) const {
    auto it = attrs.find(key);
    if (it == attrs.end()) return 0.0;  // SVG default for missing coordinates
    return leading_number(it->second);
  }

  double leading_number(const std::string& v) const {
    double x = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc{}) parse_fail(pos, "bad number '" + v + "'");
    return x;
  }

  void apply_stroke(Segment& s,
                    const std::map<std::string, std::string>& attrs) const {
    auto it = attrs.find("stroke");
    if (it != attrs.end()) s.color = parse_color(it->second);
    it = attrs.find("stroke-width");
    if (it != attrs.end()) s.width = leading_number(it->second);
  }

  static std::optional<Rgb> parse_color(const std::string& v) {
    auto hex = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      return -1;
    };
    if (v.size() == 7 && v[0] == '#') {
      int c[6];
      for (int i = 0; i < 6; ++i) {
        c[i] = hex(v[1 + i]);
        if (c[i] < 0) return std::nullopt;
      }
      return Rgb{(c[0] * 16 + c[1]) / 255.0, (c[2] * 16 + c[3]) / 255.0,
                 (c[4] * 16 + c[5]) / 255.0};
    }
    if (v.size() == 4 && v[0] == '#') {
      int c[3];
      for (int i = 0; i < 3; ++i) {
        c[i] = hex(v[1 + i]);
        if (c[i] < 0) return std::nullopt;
      }
      return Rgb{c[0] * 17 / 255.0, c[1] * 17 / 255.0, c[2] * 17 / 255.0};
    }
    if (v.rfind("rgb(", 0) == 0 && v.back() == ')') {
      double c[3];
      std::size_t p = 4;
      for (int i = 0; i < 3; ++i) {
        while (p < v.size() && (v[p] == ' ' || v[p] == ',')) ++p;
        double x = 0.0;
        auto res = std::from_chars(v.data() + p, v.data() + v.size(), x);
        if (res.ec != std::errc{}) return std::nullopt;
        p = static_cast<std::size_t>(res.ptr - v.data());
        if (p < v.size() && v[p] == '%') {
          x = x * 255.0 / 100.0;
          ++p;
        }
        c[i] = x / 255.0;
      }
      return Rgb{c[0], c[1], c[2]};
    }
    return std::nullopt;  // named colors and "none" carry no usable RGB
  }

  void push(Segment s) {
    if (s.x1 == s.x2 && s.y1 == s.y2) return;  // zero-length, draws nothing
    out.segments.push_back(s);
  }

  void read_polyline(const std::map<std::string, std::string>& attrs) {
    auto it = attrs.find("points");
    if (it == attrs.end()) return;
    const std::string& v = it->second;
    std::vector<double> nums;
    std::size_t p = 0;
    while (p < v.size()) {
      while (p < v.size() && (std::isspace(static_cast<unsigned char>(v[p])) ||
                              v[p] == ',')) {
        ++p;
      }
      if (p >= v.size()) break;
      double x = 0.0;
      auto res = std::from_chars(v.data() + p, v.data() + v.size(), x);
      if (res.ec != std::errc{}) parse_fail(pos, "bad polyline points");
      p = static_cast<std::size_t>(res.ptr - v.data());
      nums.push_back(x);
    }
    if (nums.size() % 2 != 0) parse_fail(pos, "odd polyline coordinate count");
    for (std::size_t i = 2; i + 1 < nums.size(); i += 2) {
      Segment s;
      s.x1 = nums[i - 2];
      s.y1 = nums[i - 1];
      s.x2 = nums[i];
      s.y2 = nums[i + 1];
      apply_stroke(s, attrs);
      push(s);
    }
  }

  void read_path(const std::map<std::string, std::string>& attrs) {
    auto it = attrs.find("d");
    if (it == attrs.end()) return;
    const std::string& d = it->second;

    std::size_t p = 0;
    auto skip_sep = [&] {
      while (p < d.size() && (std::isspace(static_cast<unsigned char>(d[p])) ||
                              d[p] == ',')) {
        ++p;
      }
    };
    auto number = [&]() -> double {
      skip_sep();
      double x = 0.0;
      auto res = std::from_chars(d.data() + p, d.data() + d.size(), x);
      if (res.ec != std::errc{}) parse_fail(pos, "bad path number");
      p = static_cast<std::size_t>(res.ptr - d.data());
      return x;
    };
    auto more_numbers = [&]() -> bool {
      skip_sep();
      if (p >= d.size()) return false;
      const char c = d[p];
      return c == '-' || c == '+' || c == '.' ||
             std::isdigit(static_cast<unsigned char>(c));
    };

    double cx = 0.0, cy = 0.0, sx = 0.0, sy = 0.0;
    bool have_point = false;
    auto line_to = [&](double nx, double ny) {
      Segment s;
      s.x1 = cx;
      s.y1 = cy;
      s.x2 = nx;
      s.y2 = ny;
      apply_stroke(s, attrs);
      push(s);
      cx = nx;
      cy = ny;
    };

    while (true) {
      skip_sep();
      if (p >= d.size()) break;
      const char cmd = d[p++];
      const bool rel = std::islower(static_cast<unsigned char>(cmd)) != 0;
      switch (std::toupper(static_cast<unsigned char>(cmd))) {
        case 'M': {
          double x = number(), y = number();
          if (rel && have_point) {
            x += cx;
            y += cy;
          }
          cx = sx = x;
          cy = sy = y;
          have_point = true;
          while (more_numbers()) {  // implicit LineTo pairs
            double nx = number(), ny = number();
            if (rel) {
              nx += cx;
              ny += cy;
            }
            line_to(nx, ny);
          }
          break;
        }
        case 'L':
          while (more_numbers()) {
            double nx = number(), ny = number();
            if (rel) {
              nx += cx;
              ny += cy;
            }
            line_to(nx, ny);
          }
          break;
        case 'H':
          while (more_numbers()) {
            double nx = number();
            if (rel) nx += cx;
            line_to(nx, cy);
          }
          break;
        case 'V':
          while (more_numbers()) {
            double ny = number();
            if (rel) ny += cy;
            line_to(cx, ny);
          }
          break;
        case 'Z':
          line_to(sx, sy);
          break;
        case 'C':  // curved commands: track the pen, draw nothing
          while (more_numbers()) {
            number();
            number();
            number();
            number();
            double nx = number(), ny = number();
            cx = rel ? cx + nx : nx;
            cy = rel ? cy + ny : ny;
          }
          break;
        case 'S':
        case 'Q':
          while (more_numbers()) {
            number();
            number();
            double nx = number(), ny = number();
            cx = rel ? cx + nx : nx;
            cy = rel ? cy + ny : ny;
          }
          break;
        case 'T':
          while (more_numbers()) {
            double nx = number(), ny = number();
            cx = rel ? cx + nx : nx;
            cy = rel ? cy + ny : ny;
          }
          break;
        case 'A':
          while (more_numbers()) {
            number();
            number();
            number();
            number();
            number();
            double nx = number(), ny = number();
            cx = rel ? cx + nx : nx;
            cy = rel ? cy + ny : ny;
          }
          break;
        default:
          parse_fail(pos,
                     std::string("unsupported path command '") + cmd + "'");
      }
    }
  }
};

}  // namespace

SegmentSet parse_vector_document(const std::string& bytes, FigureFormat fmt) {
  SegmentSet out;
  if (fmt == FigureFormat::segment_interchange) {
    out = parse_interchange(bytes);
  } else {
    SvgScanner scanner(bytes);
    scanner.run();
    out = std::move(scanner.out);
  }
  if (out.segments.empty()) throw std::invalid_argument("no vector content");
  return out;
}

// ---------------------------------------------------------------------------
// path assembly
// ---------------------------------------------------------------------------

namespace {

struct EndpointGraph {
  // endpoints 2*i and 2*i+1 belong to segment i
  std::vector<std::size_t> node_of;
  std::vector<std::array<double, 2>> node_pos;  // canonical (lex-min) coords
  std::vector<std::vector<std::size_t>> node_edges;
};

EndpointGraph build_graph(const SegmentSet& segs, double join_tol) {
  const std::size_t n = segs.segments.size();
  std::vector<std::array<double, 2>> pts(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[2 * i] = {segs.segments[i].x1, segs.segments[i].y1};
    pts[2 * i + 1] = {segs.segments[i].x2, segs.segments[i].y2};
  }

  std::vector<std::size_t> parent(2 * n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };

  // endpoints sorted by x so the coincidence scan only looks at neighbors
  std::vector<std::size_t> order(2 * n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a][0] < pts[b][0];
  });
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const auto& pa = pts[order[a]];
      const auto& pb = pts[order[b]];
      if (pb[0] - pa[0] > join_tol) break;
      if (std::fabs(pb[1] - pa[1]) <= join_tol &&
          std::hypot(pb[0] - pa[0], pb[1] - pa[1]) <= join_tol) {
        parent[find(order[a])] = find(order[b]);
      }
    }
  }

  EndpointGraph g;
  g.node_of.resize(2 * n);
  std::map<std::size_t, std::size_t> root_to_node;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const std::size_t root = find(i);
    auto [it, inserted] = root_to_node.try_emplace(root, g.node_pos.size());
    if (inserted) g.node_pos.push_back(pts[i]);
    g.node_of[i] = it->second;
    auto& np = g.node_pos[it->second];
    if (pts[i] < np) np = pts[i];
  }
  g.node_edges.resize(g.node_pos.size());
  for (std::size_t i = 0; i < n; ++i) {
    g.node_edges[g.node_of[2 * i]].push_back(i);
    if (g.node_of[2 * i + 1] != g.node_of[2 * i]) {
      g.node_edges[g.node_of[2 * i + 1]].push_back(i);
    }
  }
  return g;
}

struct Chain {
  std::vector<std::size_t> edges;
  std::vector<std::size_t> nodes;  // edges.size() + 1 entries
};

// Maximal paths through degree-2 nodes. Chains stop at junctions, so the
// partition is independent of segment order in the input file.
std::vector<Chain> build_chains(const SegmentSet& segs,
                                const EndpointGraph& g) {
  const std::size_t n = segs.segments.size();
  std::vector<char> used(n, 0);
  std::vector<Chain> chains;

  auto other_node = [&](std::size_t edge, std::size_t node) {
    const std::size_t a = g.node_of[2 * edge];
    const std::size_t b = g.node_of[2 * edge + 1];
    return node == a ? b : a;
  };

  std::vector<std::size_t> node_order(g.node_pos.size());
  std::iota(node_order.begin(), node_order.end(), 0);
  std::sort(node_order.begin(), node_order.end(),
            [&](std::size_t a, std::size_t b) {
              return g.node_pos[a] < g.node_pos[b];
            });

  auto walk = [&](std::size_t start_node, std::size_t first_edge) {
    Chain c;
    c.nodes.push_back(start_node);
    std::size_t node = start_node;
    std::size_t edge = first_edge;
    while (true) {
      used[edge] = 1;
      c.edges.push_back(edge);
      node = other_node(edge, node);
      c.nodes.push_back(node);
      if (g.node_edges[node].size() != 2) break;
      const auto& es = g.node_edges[node];
      const std::size_t next = es[0] == edge ? es[1] : es[0];
      if (used[next]) break;
      edge = next;
    }
    chains.push_back(std::move(c));
  };

  for (std::size_t node : node_order) {
    if (g.node_edges[node].size() == 2) continue;
    for (std::size_t edge : g.node_edges[node]) {
      if (!used[edge]) walk(node, edge);
    }
  }
  // leftover cycles (all interior nodes degree 2)
  for (std::size_t node : node_order) {
    for (std::size_t edge : g.node_edges[node]) {
      if (!used[edge]) walk(node, edge);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!used[i]) {  // degenerate self-loop
      Chain c;
      c.edges.push_back(i);
      c.nodes.push_back(g.node_of[2 * i]);
      c.nodes.push_back(g.node_of[2 * i + 1]);
      chains.push_back(std::move(c));
    }
  }
  return chains;
}

}  // namespace

std::vector<PagePolyline> assemble_paths(const SegmentSet& segs,
                                         double join_tol) {
  if (!(join_tol > 0.0)) throw std::invalid_argument("join_tol must be > 0");
  const EndpointGraph g = build_graph(segs, join_tol);
  const std::vector<Chain> chains = build_chains(segs, g);

  std::vector<PagePolyline> out;
  for (const auto& chain : chains) {
    // split into maximal monotone runs: a run survives while some orientation
    // keeps every segment at dx >= -tol and dy >= -tol (time forward,
    // survival downward in page coordinates)
    std::size_t run_start = 0;
    bool fwd_ok = true, bwd_ok = true;
    auto emit = [&](std::size_t lo, std::size_t hi, bool fwd) {
      PagePolyline poly;
      for (std::size_t k = lo; k <= hi; ++k) {
        poly.segment_ids.push_back(chain.edges[k]);
        poly.vertices.push_back(g.node_pos[chain.nodes[k]]);
      }
      poly.vertices.push_back(g.node_pos[chain.nodes[hi + 1]]);
      if (!fwd) {
        std::reverse(poly.vertices.begin(), poly.vertices.end());
        std::reverse(poly.segment_ids.begin(), poly.segment_ids.end());
      }
      poly.color = segs.segments[poly.segment_ids.front()].color;
      out.push_back(std::move(poly));
    };
    for (std::size_t k = 0; k < chain.edges.size(); ++k) {
      const auto& a = g.node_pos[chain.nodes[k]];
      const auto& b = g.node_pos[chain.nodes[k + 1]];
      const double dx = b[0] - a[0];
      const double dy = b[1] - a[1];
      const bool seg_fwd = dx >= -join_tol && dy >= -join_tol;
      const bool seg_bwd = dx <= join_tol && dy <= join_tol;
      if (k > run_start && !((fwd_ok && seg_fwd) || (bwd_ok && seg_bwd))) {
        emit(run_start, k - 1, fwd_ok);
        run_start = k;
        fwd_ok = seg_fwd;
        bwd_ok = seg_bwd;
      } else {
        fwd_ok = fwd_ok && seg_fwd;
        bwd_ok = bwd_ok && seg_bwd;
      }
    }
    if (!chain.edges.empty()) {
      emit(run_start, chain.edges.size() - 1, fwd_ok);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// curve selection
// ---------------------------------------------------------------------------

double PageStepCurve::level_at(double x) const {
  double y = steps.front()[1];
  for (const auto& s : steps) {
    if (s[0] > x) break;
    y = s[1];
  }
  return y;
}

std::vector<PageStepCurve> select_km_curves(
    const std::vector<PagePolyline>& paths, int k_curves, double join_tol) {
  if (k_curves < 1) throw std::invalid_argument("k_curves must be >= 1");
  if (static_cast<int>(paths.size()) < k_curves) {
    std::ostringstream msg;
    msg << "need " << k_curves << " curves but only " << paths.size()
        << " candidate paths (segment counts:";
    for (const auto& p : paths) msg << " " << p.n_segments();
    msg << ")";
    throw std::invalid_argument(msg.str());
  }

  std::vector<std::size_t> order(paths.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (paths[a].n_segments() != paths[b].n_segments()) {
      return paths[a].n_segments() > paths[b].n_segments();
    }
    const double spana =
        paths[a].vertices.back()[0] - paths[a].vertices.front()[0];
    const double spanb =
        paths[b].vertices.back()[0] - paths[b].vertices.front()[0];
    if (spana != spanb) return spana > spanb;
    return paths[a].vertices.front() < paths[b].vertices.front();
  });

  std::vector<PageStepCurve> out;
  for (int c = 0; c < k_curves; ++c) {
    const PagePolyline& poly = paths[order[c]];
    PageStepCurve curve;
    curve.segment_ids = poly.segment_ids;
    curve.color = poly.color;
    curve.n_segments = poly.n_segments();
    curve.min_x = curve.max_x = poly.vertices.front()[0];
    curve.min_y = curve.max_y = poly.vertices.front()[1];
    for (const auto& v : poly.vertices) {
      curve.min_x = std::min(curve.min_x, v[0]);
      curve.max_x = std::max(curve.max_x, v[0]);
      curve.min_y = std::min(curve.min_y, v[1]);
      curve.max_y = std::max(curve.max_y, v[1]);
    }
    // starting level, then one entry per vertical drop; drops sharing an x
    // merge to the lowest level
    curve.steps.push_back(poly.vertices.front());
    for (std::size_t i = 1; i < poly.vertices.size(); ++i) {
      const auto& v = poly.vertices[i];
      auto& last = curve.steps.back();
      if (std::fabs(v[1] - last[1]) <= join_tol) continue;
      if (curve.steps.size() > 1 && std::fabs(v[0] - last[0]) <= join_tol) {
        last[1] = v[1];
      } else {
        curve.steps.push_back({v[0], v[1]});
      }
    }
    out.push_back(std::move(curve));
  }
  return out;
}

// ---------------------------------------------------------------------------
// axes
// ---------------------------------------------------------------------------

AxisCalibration detect_axes(const SegmentSet& segs,
                            const std::vector<PageStepCurve>& curves,
                            double span_tol, double t_max, double s_max) {
  if (curves.empty()) throw std::invalid_argument("no curves for axis search");
  double cmin_x = curves[0].min_x, cmax_x = curves[0].max_x;
  double cmin_y = curves[0].min_y, cmax_y = curves[0].max_y;
  for (const auto& c : curves) {
    cmin_x = std::min(cmin_x, c.min_x);
    cmax_x = std::max(cmax_x, c.max_x);
    cmin_y = std::min(cmin_y, c.min_y);
    cmax_y = std::max(cmax_y, c.max_y);
  }
  const double hspan = cmax_x - cmin_x;
  const double vspan = cmax_y - cmin_y;
  const double flat_tol = 1e-9;

  // rank candidates by distance to the curve, then by span mismatch, then by
  // position, so ties resolve the same way regardless of segment order
  const Segment* best_x = nullptr;
  const Segment* best_y = nullptr;
  std::array<double, 4> best_xkey{}, best_ykey{};
  for (const auto& s : segs.segments) {
    if (std::fabs(s.y2 - s.y1) <= flat_tol) {
      const double len = std::fabs(s.x2 - s.x1);
      if (std::fabs(len - hspan) <= span_tol * hspan) {
        const std::array<double, 4> key{std::fabs(s.y1 - cmax_y),
                                        std::fabs(len - hspan), s.y1,
                                        std::min(s.x1, s.x2)};
        if (!best_x || key < best_xkey) {
          best_xkey = key;
          best_x = &s;
        }
      }
    }
    if (std::fabs(s.x2 - s.x1) <= flat_tol) {
      const double len = std::fabs(s.y2 - s.y1);
      if (std::fabs(len - vspan) <= span_tol * vspan) {
        const std::array<double, 4> key{std::fabs(s.x1 - cmin_x),
                                        std::fabs(len - vspan), s.x1,
                                        std::min(s.y1, s.y2)};
        if (!best_y || key < best_ykey) {
          best_ykey = key;
          best_y = &s;
        }
      }
    }
  }
  if (!best_x) {
    throw std::invalid_argument(
        "axis not found: no horizontal rule matches the curve span");
  }
  if (!best_y) {
    throw std::invalid_argument(
        "axis not found: no vertical rule matches the curve span");
  }

  AxisCalibration calib;
  calib.x_start = std::min(best_x->x1, best_x->x2);
  calib.x_end = std::max(best_x->x1, best_x->x2);
  calib.y_start = std::max(best_y->y1, best_y->y2);  // survival 0 (bottom)
  calib.y_end = std::min(best_y->y1, best_y->y2);    // survival s_max (top)
  calib.t_max = t_max;
  calib.s_max = s_max;
  return calib;
}

std::array<double, 2> to_data_space(double x, double y,
                                    const AxisCalibration& calib) {
  const double t =
      (x - calib.x_start) * calib.t_max / (calib.x_end - calib.x_start);
  // survival on the figure's own scale, then normalized to [0, 1]
  const double s_fig =
      (calib.y_start - y) * calib.s_max / (calib.y_start - calib.y_end);
  return {t, s_fig / calib.s_max};
}

// ---------------------------------------------------------------------------
// censor marks
// ---------------------------------------------------------------------------

CensorDetection detect_censor_marks(const SegmentSet& segs,
                                    const std::vector<PageStepCurve>& curves,
                                    const AxisCalibration& calib,
                                    const CensorMarkConfig& cfg) {
  const double yspan = std::fabs(calib.y_start - calib.y_end);
  const double min_len = cfg.min_len_frac * yspan;
  const double max_len = cfg.max_len_frac * yspan;
  const double assign_tol = cfg.assign_frac * yspan;

  std::vector<char> in_curve(segs.segments.size(), 0);
  for (const auto& c : curves) {
    for (std::size_t id : c.segment_ids) in_curve[id] = 1;
  }

  struct Candidate {
    std::size_t id;
    double cx, cy;
    bool vertical;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < segs.segments.size(); ++i) {
    if (in_curve[i]) continue;
    const Segment& s = segs.segments[i];
    const double len = s.length();
    if (len < min_len || len > max_len) continue;
    cands.push_back({i, 0.5 * (s.x1 + s.x2), 0.5 * (s.y1 + s.y2),
                     std::fabs(s.x2 - s.x1) <= cfg.join_tol});
  }
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) {
              return std::tie(a.cx, a.cy, a.id) < std::tie(b.cx, b.cy, b.id);
            });

  // segments sharing a geometric center form one mark (crosses, ticks drawn
  // more than once)
  struct Mark {
    double cx, cy;
    bool has_vertical = false;
    std::vector<std::size_t> ids;
  };
  std::vector<Mark> marks;
  std::vector<char> grouped(cands.size(), 0);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (grouped[i]) continue;
    Mark m{cands[i].cx, cands[i].cy, cands[i].vertical, {cands[i].id}};
    grouped[i] = 1;
    for (std::size_t j = i + 1; j < cands.size(); ++j) {
      if (grouped[j]) continue;
      if (cands[j].cx - m.cx > cfg.join_tol) break;
      if (std::fabs(cands[j].cy - m.cy) <= cfg.join_tol) {
        m.has_vertical |= cands[j].vertical;
        m.ids.push_back(cands[j].id);
        grouped[j] = 1;
      }
    }
    // a lone non-vertical short segment is stray geometry, not a mark
    if (m.has_vertical || m.ids.size() >= 2) marks.push_back(std::move(m));
  }

  CensorDetection det;
  det.per_curve_times.resize(curves.size());
  for (const auto& m : marks) {
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> tied;
    for (std::size_t c = 0; c < curves.size(); ++c) {
      const auto& curve = curves[c];
      if (m.cx < curve.min_x - cfg.join_tol ||
          m.cx > curve.max_x + cfg.join_tol) {
        continue;
      }
      const double dist = std::fabs(m.cy - curve.level_at(m.cx));
      if (dist > assign_tol) continue;
      if (dist < best_dist - 1e-9) {
        best_dist = dist;
        tied = {c};
      } else if (dist <= best_dist + 1e-9) {
        tied.push_back(c);
      }
    }
    if (tied.empty()) {
      for (std::size_t id : m.ids) det.unassigned.push_back(segs.segments[id]);
      continue;
    }
    std::size_t chosen = tied.front();
    if (tied.size() > 1) {
      const auto mark_color = segs.segments[m.ids.front()].color;
      if (mark_color) {
        for (std::size_t c : tied) {
          if (curves[c].color && *curves[c].color == *mark_color) {
            chosen = c;
            break;
          }
        }
      }
    }
    det.per_curve_times[chosen].push_back(to_data_space(m.cx, m.cy, calib)[0]);
  }
  for (auto& ts : det.per_curve_times) std::sort(ts.begin(), ts.end());
  return det;
}

// ---------------------------------------------------------------------------
// full extraction
// ---------------------------------------------------------------------------

ExtractedFigure extract_figure(const SegmentSet& segs,
                               const ExtractionConfig& cfg) {
  const auto paths = assemble_paths(segs, cfg.join_tol);
  const auto page_curves = select_km_curves(paths, cfg.k_curves, cfg.join_tol);
  const auto calib =
      detect_axes(segs, page_curves, cfg.span_tol, cfg.t_max, cfg.s_max);
  CensorMarkConfig censor_cfg = cfg.censor;
  censor_cfg.join_tol = cfg.join_tol;
  const auto marks = detect_censor_marks(segs, page_curves, calib, censor_cfg);

  ExtractedFigure fig;
  fig.calibration = calib;
  fig.unassigned_marks = marks.unassigned;
  fig.n_segments = segs.segments.size();
  fig.n_paths = paths.size();
  for (std::size_t c = 0; c < page_curves.size(); ++c) {
    StepCurve curve;
    for (const auto& step : page_curves[c].steps) {
      const auto ts = to_data_space(step[0], step[1], calib);
      CurvePoint p;
      p.time = ts[0];
      p.survival = ts[1];
      curve.points.push_back(p);
    }
    curve.censor_times = marks.per_curve_times[c];
    if (c < cfg.n_initial.size()) curve.n_initial = cfg.n_initial[c];
    validate(curve, 1e-9);
    fig.curves.push_back(std::move(curve));
    fig.curve_colors.push_back(page_curves[c].color);
  }
  return fig;
}

std::string extraction_report_json(const ExtractedFigure& fig) {
  nlohmann::json j;
  j["n_segments"] = fig.n_segments;
  j["n_paths"] = fig.n_paths;
  j["calibration"] = {{"x_start", fig.calibration.x_start},
                      {"x_end", fig.calibration.x_end},
                      {"y_start", fig.calibration.y_start},
                      {"y_end", fig.calibration.y_end},
                      {"t_max", fig.calibration.t_max},
                      {"s_max", fig.calibration.s_max}};
  j["curves"] = nlohmann::json::array();
  for (std::size_t c = 0; c < fig.curves.size(); ++c) {
    nlohmann::json cj;
    cj["n_points"] = fig.curves[c].points.size();
    cj["n_censor_marks"] = fig.curves[c].censor_times.size();
    cj["n_initial"] = fig.curves[c].n_initial;
    if (fig.curve_colors[c]) {
      cj["rgb"] = {fig.curve_colors[c]->r, fig.curve_colors[c]->g,
                   fig.curve_colors[c]->b};
    }
    j["curves"].push_back(cj);
  }
  j["unassigned_marks"] = nlohmann::json::array();
  for (const auto& s : fig.unassigned_marks) {
    j["unassigned_marks"].push_back(
        {{"x1", s.x1}, {"y1", s.y1}, {"x2", s.x2}, {"y2", s.y2}});
  }
  return j.dump(2) + "\n";
}

}  // namespace kmrecon
