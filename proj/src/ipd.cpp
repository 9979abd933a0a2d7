#include "kmrecon/ipd.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kmrecon {

namespace {

std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const char* what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("bad ") + what + " value: '" +
                                std::string(s) + "'");
  }
  return v;
}

}  // namespace

void validate(const IpdSet& ipd, int k_sub) {
  if (ipd.empty()) throw std::invalid_argument("no subjects");
  for (const auto& r : ipd.records) {
    if (!(r.time >= 0.0)) throw std::invalid_argument("negative time");
    if (r.label && k_sub >= 0 && (*r.label < 0 || *r.label >= k_sub)) {
      throw std::invalid_argument("label out of range");
    }
  }
}

IpdSet slice_arm(const IpdSet& ipd, Arm arm) {
  IpdSet out;
  out.provenance = ipd.provenance;
  for (const auto& r : ipd.records) {
    if (r.arm == arm) out.records.push_back(r);
  }
  return out;
}

IpdSet slice_label(const IpdSet& ipd, int label) {
  IpdSet out;
  out.provenance = ipd.provenance;
  for (const auto& r : ipd.records) {
    if (r.label && *r.label == label) out.records.push_back(r);
  }
  return out;
}

std::string ipd_to_csv(const IpdSet& ipd) {
  std::string out = "time,event,arm,label\n";
  for (const auto& r : ipd.records) {
    out += format_double(r.time);
    out += r.event ? ",1," : ",0,";
    out += r.arm == Arm::treatment ? '1' : '0';
    out += ',';
    if (r.label) out += std::to_string(*r.label);
    out += '\n';
  }
  return out;
}

IpdSet ipd_from_csv(const std::string& text, std::string provenance) {
  IpdSet out;
  out.provenance = std::move(provenance);
  std::istringstream in(text);
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("time,", 0) == 0) continue;  // header row present
    }
    std::vector<std::string_view> fields;
    std::string_view sv(line);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= sv.size(); ++i) {
      if (i == sv.size() || sv[i] == ',') {
        fields.push_back(sv.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() < 3 || fields.size() > 4) {
      throw std::invalid_argument("line " + std::to_string(lineno) +
                                  ": expected time,event,arm[,label]");
    }
    IpdRecord r;
    r.time = parse_double(fields[0], "time");
    r.event = parse_double(fields[1], "event") != 0.0;
    r.arm = parse_double(fields[2], "arm") != 0.0 ? Arm::treatment
                                                  : Arm::control;
    if (fields.size() == 4 && !fields[3].empty()) {
      r.label = static_cast<int>(parse_double(fields[3], "label"));
    }
    out.records.push_back(r);
  }
  return out;
}

void write_ipd_csv(const std::string& path, const IpdSet& ipd) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << ipd_to_csv(ipd);
}

IpdSet read_ipd_csv(const std::string& path, std::string provenance) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ipd_from_csv(ss.str(), std::move(provenance));
}

}  // namespace kmrecon
