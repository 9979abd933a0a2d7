#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kmrecon/ipd.hpp"
#include "kmrecon/step_curve.hpp"

namespace kmrecon {

struct RiskEntry {
  double time = 0.0;
  long n_at_risk = 0;
};

// Published number-at-risk table; times strictly increasing, counts
// non-increasing.
struct RiskTable {
  std::vector<RiskEntry> entries;
};

void validate(const RiskTable& table);

// Counts |{i : time_i >= tau}| at tau = 0, step, 2*step, ... <= t_max.
RiskTable risk_table_from_ipd(std::span<const IpdRecord> records, double step,
                              double t_max);

std::string risk_table_to_csv(const RiskTable& table);
RiskTable risk_table_from_csv(const std::string& text);
void write_risk_table_csv(const std::string& path, const RiskTable& table);
RiskTable read_risk_table_csv(const std::string& path);

struct ReconstructConfig {
  double tol = 1e-4;      // survival-probability tolerance per drop
  int c_max = 20;         // max overlapped censors hidden under one mark
  int branch_radius = 1;  // event-count branches m-r .. m+r
};

// Per-drop bookkeeping: what the curve asked for and what was placed.
struct IntervalRow {
  double time = 0.0;
  double target_s = 1.0;
  double achieved_s = 1.0;
  int events = 0;
  int unique_censors = 0;
  int overlap_censors = 0;
  double deviation = 0.0;
  bool flagged = false;  // deviation >= tol (e.g. empty candidate pool)
};

struct RiskAlignmentRow {
  double time = 0.0;
  long target = 0;
  long before = 0;
  long after = 0;
  long residual = 0;  // target - after; non-zero means unsatisfiable
};

struct ReconstructionReport {
  IpdSet ipd;
  // parallel to ipd.records: censor record placed as an overlap (not its own
  // mark); events are always false here
  std::vector<bool> overlapped;
  std::vector<IntervalRow> intervals;
  std::vector<RiskAlignmentRow> risk_rows;
  int tail_unique_censors = 0;
  int tail_overlap_censors = 0;
  bool tail_flagged = false;  // leftover subjects with no tail mark to carry them
};

// Event-and-censoring reconstruction from a digitized curve: censor marks are
// deterministic data points, event counts come from a branch search around the
// first count reproducing each drop, and overlapped censors are drawn from the
// mark pool until the drop matches within cfg.tol. Throws "population
// underflow" when the curve demands more subjects than n_initial provides.
ReconstructionReport reconstruct_ipd(const StepCurve& curve, int n_initial,
                                     const std::optional<RiskTable>& table,
                                     const ReconstructConfig& cfg,
                                     Arm arm = Arm::control);

// Risk-table alignment: retimes censor records (never events) so the implied
// at-risk count matches the table at every boundary; overlapped censors move
// first. Residuals that would require touching events are recorded instead.
void align_risk_table(ReconstructionReport& rep, const RiskTable& table,
                      const std::vector<double>& candidate_pool);

std::string reconstruction_report_json(const ReconstructionReport& rep);

}  // namespace kmrecon
