#include "ooload/bench/report.hpp"

#include <fmt/format.h>

#include "ooload/core/error.hpp"
#include "ooload/core/stats.hpp"

namespace ooload {

namespace {

void add(CheckOutcome& out, bool ok, const std::string& what) {
  out.lines.push_back(fmt::format("{} {}", ok ? "PASS" : "FAIL", what));
  out.pass = out.pass && ok;
}

double wait_spread(const RunMetrics& m) {
  const auto w = post_transient_waits(m);
  if (w.empty()) return 0.0;
  const double med = stats::median(w);
  return med > 0 ? stats::max(w) / med : 0.0;
}

double throughput_cv(const RunMetrics& m) {
  const auto s = steady_throughput_series(m);
  return s.size() >= 2 ? stats::cv(s) : 0.0;
}

}  // namespace

CheckOutcome check_run(const RunMetrics& run, const CheckThresholds& t, const RunMetrics* baseline) {
  CheckOutcome out;
  if (t.min_bytes_per_s) {
    const double v = mean_epoch_throughput(run);
    add(out, v >= *t.min_bytes_per_s, fmt::format("throughput {:.4g} B/s >= {:.4g}", v, *t.min_bytes_per_s));
  }
  if (t.max_wait_spread) {
    const double v = wait_spread(run);
    add(out, v <= *t.max_wait_spread, fmt::format("wait max/median {:.3f} <= {:.3f}", v, *t.max_wait_spread));
  }
  if (t.max_transient_ratio) {
    const double v = run.transient_request_ratio;
    add(out, v <= *t.max_transient_ratio,
        fmt::format("transient request ratio {:.4f} <= {:.4f}", v, *t.max_transient_ratio));
  }
  if (t.min_utilization) {
    const double target = run.per_consumer_rate * static_cast<double>(run.consumers);
    const double v = target > 0 ? run.achieved_items_per_s() / target : 0.0;
    add(out, v >= *t.min_utilization, fmt::format("utilization {:.4f} >= {:.4f}", v, *t.min_utilization));
  }
  if (t.min_gain || t.max_cv_ratio) {
    if (!baseline) throw InvalidInput("baseline checks need a baseline run");
    if (t.min_gain) {
      const double b = mean_epoch_throughput(*baseline);
      const double v = b > 0 ? mean_epoch_throughput(run) / b : 0.0;
      add(out, v >= *t.min_gain, fmt::format("throughput gain {:.3f} >= {:.3f}", v, *t.min_gain));
    }
    if (t.max_cv_ratio) {
      const double b = throughput_cv(*baseline);
      const double v = b > 0 ? throughput_cv(run) / b : 0.0;
      add(out, b > 0 && v <= *t.max_cv_ratio, fmt::format("cv ratio {:.3f} <= {:.3f}", v, *t.max_cv_ratio));
    }
  }
  return out;
}

std::string format_report(const RunMetrics& run) {
  std::string out;
  for (const auto& [k, v] : summarize(run)) out += fmt::format("{:<34} {}\n", k, v);
  out += "\nloader epoch  items      MB       s      MB/s    checksum\n";
  for (const auto& e : run.epochs) {
    out += fmt::format("{:>6} {:>5} {:>6} {:>8.1f} {:>7.3f} {:>9.1f}  {:016x}{}\n", e.loader, e.epoch, e.items,
                       static_cast<double>(e.bytes) / 1e6, e.duration(), e.bytes_per_s() / 1e6, e.checksum,
                       e.partial ? "  partial" : "");
  }
  return out;
}

}  // namespace ooload
