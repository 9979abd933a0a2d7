#include "kmrecon/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "kmrecon/format.hpp"

namespace kmrecon {

void validate(const RiskTable& table) {
  double prev_t = -std::numeric_limits<double>::infinity();
  long prev_n = std::numeric_limits<long>::max();
  for (const auto& e : table.entries) {
    if (e.time <= prev_t) {
      throw std::invalid_argument("risk table times not strictly increasing");
    }
    if (e.n_at_risk < 0 || e.n_at_risk > prev_n) {
      throw std::invalid_argument("risk table counts must be non-increasing");
    }
    prev_t = e.time;
    prev_n = e.n_at_risk;
  }
}

RiskTable risk_table_from_ipd(std::span<const IpdRecord> records, double step,
                              double t_max) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  RiskTable table;
  for (double tau = 0.0; tau <= t_max + 1e-12; tau += step) {
    long n = 0;
    for (const auto& r : records) {
      if (r.time >= tau) ++n;
    }
    table.entries.push_back({tau, n});
  }
  return table;
}

std::string risk_table_to_csv(const RiskTable& table) {
  std::string out = "time,n_at_risk\n";
  for (const auto& e : table.entries) {
    out += format_double(e.time) + "," + std::to_string(e.n_at_risk) + "\n";
  }
  return out;
}

RiskTable risk_table_from_csv(const std::string& text) {
  RiskTable table;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("time", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("risk table row needs time,n_at_risk");
    }
    RiskEntry e;
    e.time = std::stod(line.substr(0, comma));
    e.n_at_risk = std::stol(line.substr(comma + 1));
    table.entries.push_back(e);
  }
  validate(table);
  return table;
}

void write_risk_table_csv(const std::string& path, const RiskTable& table) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << risk_table_to_csv(table);
}

RiskTable read_risk_table_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return risk_table_from_csv(ss.str());
}

namespace {

struct WorkingRecord {
  double time;
  bool event;
  bool overlapped;
};

// Kaplan-Meier factor of one drop given events e and at-risk n.
double drop_factor(int e, int n) {
  return 1.0 - static_cast<double>(e) / static_cast<double>(n);
}

}  // namespace

ReconstructionReport reconstruct_ipd(const StepCurve& curve, int n_initial,
                                     const std::optional<RiskTable>& table,
                                     const ReconstructConfig& cfg, Arm arm) {
  validate(curve, 1e-9);
  if (n_initial < 1) throw std::invalid_argument("n_initial must be >= 1");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (cfg.c_max < 1) throw std::invalid_argument("c_max must be >= 1");
  std::vector<double> pool = curve.censor_times;
  if (!std::is_sorted(pool.begin(), pool.end())) {
    throw std::invalid_argument("censor_times must be sorted ascending");
  }

  ReconstructionReport rep;
  std::vector<WorkingRecord> recs;
  recs.reserve(n_initial);
  std::vector<int> pool_overlaps(pool.size(), 0);

  double achieved = 1.0;  // running reconstructed KM level
  int remaining = n_initial;
  double prev_time = -std::numeric_limits<double>::infinity();
  std::size_t pool_pos = 0;

  double target_level = 1.0;
  for (const auto& pt : curve.points) {
    if (pt.survival >= target_level) continue;  // starting level, not a drop
    target_level = pt.survival;
    const double t = pt.time;
    const double target = pt.survival;

    // (1) every mark inside the interval contributes one deterministic censor
    const std::size_t first_mark = pool_pos;
    int unique = 0;
    while (pool_pos < pool.size() && pool[pool_pos] < t) {
      recs.push_back({pool[pool_pos], false, false});
      ++unique;
      ++pool_pos;
    }
    const std::size_t end_mark = pool_pos;
    remaining -= unique;
    const int n_avail = remaining;
    if (n_avail <= 0) throw std::runtime_error("population underflow");

    // (2) first event count whose product-limit step reaches the target
    int m = 0;
    while (m < n_avail && achieved * drop_factor(m, n_avail) > target) ++m;

    // (3)+(4) branch around m, growing overlapped censors inside each branch
    struct Branch {
      int events = 0;
      int overlaps = 0;
      double dev = std::numeric_limits<double>::infinity();
      double s = 1.0;
    };
    Branch best;
    // the m-1 branch disappears at m=1: a drop needs at least one event
    const int lo = std::max(m - cfg.branch_radius, m == 0 ? 0 : 1);
    const int hi = std::min(m + cfg.branch_radius, n_avail);
    const long mark_budget =
        static_cast<long>(end_mark - first_mark) * cfg.c_max;
    for (int e = lo; e <= hi; ++e) {
      Branch br;
      br.events = e;
      br.s = achieved * drop_factor(e, n_avail);
      br.dev = std::fabs(br.s - target);
      int o = 0;
      double best_dev = br.dev;
      while (best_dev >= cfg.tol && o < mark_budget && n_avail - (o + 1) >= e &&
             n_avail - (o + 1) >= 1) {
        ++o;
        const double s = achieved * drop_factor(e, n_avail - o);
        const double dev = std::fabs(s - target);
        if (dev < best_dev) {
          best_dev = dev;
          br.overlaps = o;
          br.s = s;
          br.dev = dev;
        } else if (dev > best_dev) {
          break;  // past the V-shaped minimum
        }
      }
      // (5) smallest deviation wins; ties prefer fewer censors, then events
      const auto key = [](const Branch& b) {
        return std::make_tuple(b.dev, b.overlaps, b.events);
      };
      if (key(br) < key(best)) best = br;
    }
    if (best.events > n_avail - best.overlaps) {
      throw std::runtime_error("population underflow");
    }

    // commit: overlapped censors ride existing marks, earliest first
    if (best.overlaps > 0) {
      int placed = 0;
      while (placed < best.overlaps) {
        bool any = false;
        for (std::size_t mk = first_mark;
             mk < end_mark && placed < best.overlaps; ++mk) {
          if (pool_overlaps[mk] < cfg.c_max) {
            ++pool_overlaps[mk];
            recs.push_back({pool[mk], false, true});
            ++placed;
            any = true;
          }
        }
        if (!any) break;
      }
    }
    for (int k = 0; k < best.events; ++k) recs.push_back({t, true, false});
    remaining -= best.overlaps + best.events;
    achieved = best.s;

    IntervalRow row;
    row.time = t;
    row.target_s = target;
    row.achieved_s = achieved;
    row.events = best.events;
    row.unique_censors = unique;
    row.overlap_censors = best.overlaps;
    row.deviation = best.dev;
    row.flagged = best.dev >= cfg.tol;
    rep.intervals.push_back(row);
    prev_time = t;
  }

  // tail: marks after the last drop carry the survivors
  const std::size_t tail_first = pool_pos;
  while (pool_pos < pool.size()) {
    if (remaining <= 0) throw std::runtime_error("population underflow");
    recs.push_back({pool[pool_pos], false, false});
    ++rep.tail_unique_censors;
    --remaining;
    ++pool_pos;
  }
  if (remaining > 0) {
    if (pool.size() > tail_first) {
      // extras overlap the latest marks first (administrative censoring
      // clusters at the end of follow-up)
      while (remaining > 0) {
        bool any = false;
        for (std::size_t mk = pool.size(); mk-- > tail_first && remaining > 0;) {
          if (pool_overlaps[mk] < cfg.c_max) {
            ++pool_overlaps[mk];
            recs.push_back({pool[mk], false, true});
            ++rep.tail_overlap_censors;
            --remaining;
            any = true;
          }
        }
        if (!any) break;
      }
    }
    if (remaining > 0) {
      // no marks left to carry them: censor at the end of the observed curve
      rep.tail_flagged = true;
      const double end_time =
          std::max(curve.max_time(), prev_time > 0.0 ? prev_time : 0.0);
      while (remaining > 0) {
        recs.push_back({end_time, false, true});
        --remaining;
      }
    }
  }

  std::stable_sort(recs.begin(), recs.end(),
                   [](const WorkingRecord& a, const WorkingRecord& b) {
                     if (a.time != b.time) return a.time < b.time;
                     return a.event && !b.event;  // events first at ties
                   });
  rep.ipd.provenance = "reconstructed";
  for (const auto& w : recs) {
    IpdRecord r;
    r.time = w.time;
    r.event = w.event;
    r.arm = arm;
    rep.ipd.records.push_back(r);
    rep.overlapped.push_back(w.overlapped);
  }

  if (table) {
    validate(*table);
    align_risk_table(rep, *table, pool);
  }
  return rep;
}

void align_risk_table(ReconstructionReport& rep, const RiskTable& table,
                      const std::vector<double>& candidate_pool) {
  auto& records = rep.ipd.records;
  for (const auto& entry : table.entries) {
    const double tau = entry.time;
    auto at_risk = [&] {
      long n = 0;
      for (const auto& r : records) {
        if (r.time >= tau) ++n;
      }
      return n;
    };
    RiskAlignmentRow row;
    row.time = tau;
    row.target = entry.n_at_risk;
    row.before = at_risk();
    long delta = entry.n_at_risk - row.before;

    if (delta > 0) {
      // too few at risk: censors before tau move onto marks at/after tau,
      // overlapped ones first, then unique marks latest-first
      const double fallback = std::max(
          tau, records.empty() ? tau : records.back().time);
      double retarget = fallback;
      for (double c : candidate_pool) {
        if (c >= tau) {
          retarget = c;
          break;
        }
      }
      for (int pass = 0; pass < 2 && delta > 0; ++pass) {
        const bool want_overlapped = pass == 0;
        while (delta > 0) {
          std::ptrdiff_t pick = -1;
          double pick_time = -1.0;
          for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].event || records[i].time >= tau) continue;
            if (rep.overlapped[i] != want_overlapped) continue;
            if (records[i].time > pick_time) {
              pick_time = records[i].time;
              pick = static_cast<std::ptrdiff_t>(i);
            }
          }
          if (pick < 0) break;
          records[pick].time = retarget;
          rep.overlapped[pick] = true;  // it now rides another mark
          --delta;
        }
      }
    } else if (delta < 0) {
      // too many at risk: later censors move onto marks before tau,
      // latest-first through the candidate pool
      std::vector<double> targets;
      for (auto it = candidate_pool.rbegin(); it != candidate_pool.rend();
           ++it) {
        if (*it < tau) targets.push_back(*it);
      }
      if (!targets.empty()) {
        std::size_t next_target = 0;
        for (int pass = 0; pass < 2 && delta < 0; ++pass) {
          const bool want_overlapped = pass == 0;
          while (delta < 0) {
            std::ptrdiff_t pick = -1;
            double pick_time = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < records.size(); ++i) {
              if (records[i].event || records[i].time < tau) continue;
              if (rep.overlapped[i] != want_overlapped) continue;
              if (records[i].time < pick_time) {
                pick_time = records[i].time;
                pick = static_cast<std::ptrdiff_t>(i);
              }
            }
            if (pick < 0) break;
            records[pick].time = targets[next_target];
            next_target = (next_target + 1) % targets.size();
            rep.overlapped[pick] = true;
            ++delta;
          }
        }
      }
    }
    row.after = at_risk();
    row.residual = entry.n_at_risk - row.after;
    rep.risk_rows.push_back(row);
  }

  // keep records time-ordered after the moves
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (records[a].time != records[b].time) {
                       return records[a].time < records[b].time;
                     }
                     return records[a].event && !records[b].event;
                   });
  std::vector<IpdRecord> sorted_recs;
  std::vector<bool> sorted_flags;
  sorted_recs.reserve(records.size());
  sorted_flags.reserve(records.size());
  for (std::size_t i : order) {
    sorted_recs.push_back(records[i]);
    sorted_flags.push_back(rep.overlapped[i]);
  }
  records = std::move(sorted_recs);
  rep.overlapped = std::move(sorted_flags);
}

std::string reconstruction_report_json(const ReconstructionReport& rep) {
  nlohmann::json j;
  j["n_records"] = rep.ipd.records.size();
  long events = 0, censors = 0, overlaps = 0;
  for (std::size_t i = 0; i < rep.ipd.records.size(); ++i) {
    if (rep.ipd.records[i].event) {
      ++events;
    } else {
      ++censors;
      if (rep.overlapped[i]) ++overlaps;
    }
  }
  j["n_events"] = events;
  j["n_censored"] = censors;
  j["n_overlapped_censors"] = overlaps;
  j["tail_unique_censors"] = rep.tail_unique_censors;
  j["tail_overlap_censors"] = rep.tail_overlap_censors;
  j["tail_flagged"] = rep.tail_flagged;
  j["intervals"] = nlohmann::json::array();
  for (const auto& r : rep.intervals) {
    j["intervals"].push_back({{"time", r.time},
                              {"target_s", r.target_s},
                              {"achieved_s", r.achieved_s},
                              {"events", r.events},
                              {"unique_censors", r.unique_censors},
                              {"overlap_censors", r.overlap_censors},
                              {"deviation", r.deviation},
                              {"flagged", r.flagged}});
  }
  j["risk_alignment"] = nlohmann::json::array();
  for (const auto& r : rep.risk_rows) {
    j["risk_alignment"].push_back({{"time", r.time},
                                   {"target", r.target},
                                   {"before", r.before},
                                   {"after", r.after},
                                   {"residual", r.residual}});
  }
  return j.dump(2) + "\n";
}

}  // namespace kmrecon
