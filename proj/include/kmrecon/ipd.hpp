#pragma once

#include <optional>
#include <string>
#include <vector>

namespace kmrecon {

enum class Arm : int { control = 0, treatment = 1 };

// One subject: follow-up time in months, event flag (true = death/event,
// false = censored), trial arm, and an optional subgroup label.
struct IpdRecord {
  double time = 0.0;
  bool event = false;
  Arm arm = Arm::control;
  std::optional<int> label;
};

struct IpdSet {
  std::vector<IpdRecord> records;
  std::string provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// Throws std::invalid_argument on negative times or out-of-range labels.
void validate(const IpdSet& ipd, int k_sub = -1);

// Subset helpers; record order is preserved.
IpdSet slice_arm(const IpdSet& ipd, Arm arm);
IpdSet slice_label(const IpdSet& ipd, int label);

// CSV with header `time,event,arm,label`; event and arm are 0/1, label is
// empty for unlabeled records. Times are written round-trip exact.
std::string ipd_to_csv(const IpdSet& ipd);
IpdSet ipd_from_csv(const std::string& text, std::string provenance = "");

void write_ipd_csv(const std::string& path, const IpdSet& ipd);
IpdSet read_ipd_csv(const std::string& path, std::string provenance = "");

}  // namespace kmrecon
