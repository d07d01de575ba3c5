#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ooload/bench/metrics.hpp"

namespace ooload {

// Thresholds for `report --check`. Unset entries are not checked. The
// baseline entries compare the run against a second run directory.
struct CheckThresholds {
  std::optional<double> min_bytes_per_s;
  std::optional<double> max_wait_spread;  // post-transient max wait / median wait
  std::optional<double> max_transient_ratio;
  std::optional<double> min_utilization;  // trainsim achieved / target
  std::optional<double> min_gain;         // throughput / baseline throughput
  std::optional<double> max_cv_ratio;     // cv / baseline cv
};

struct CheckOutcome {
  std::vector<std::string> lines;  // one "PASS ..." / "FAIL ..." line per check
  bool pass = true;
};

CheckOutcome check_run(const RunMetrics& run, const CheckThresholds& t, const RunMetrics* baseline = nullptr);

// Human-readable summary of one run.
std::string format_report(const RunMetrics& run);

}  // namespace ooload
