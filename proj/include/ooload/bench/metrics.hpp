#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ooload {

struct BatchRecord {
  std::size_t loader = 0;
  std::uint64_t epoch = 0;
  std::size_t seq = 0;
  std::size_t items = 0;
  std::uint64_t bytes = 0;
  double request_time = 0.0;
  double ready_time = 0.0;
  double ask_time = 0.0;
  double emit_time = 0.0;

  double assembly_time() const noexcept { return ready_time - request_time; }
  double wait_time() const noexcept { return emit_time - ask_time; }
};

struct EpochMetrics {
  std::size_t loader = 0;
  std::uint64_t epoch = 0;
  double start = 0.0;
  double end = 0.0;
  std::uint64_t bytes = 0;
  std::size_t items = 0;
  std::uint64_t checksum = 0;
  bool partial = false;

  double duration() const noexcept { return end - start; }
  double bytes_per_s() const noexcept { return duration() > 0 ? static_cast<double>(bytes) / duration() : 0.0; }
  double items_per_s() const noexcept { return duration() > 0 ? static_cast<double>(items) / duration() : 0.0; }
};

// Everything a tight-loop or train-sim run records. Times are seconds from
// the start of the run, already divided by the time dilation factor.
struct RunMetrics {
  std::string kind;  // "tightloop" or "trainsim"
  std::string source = "wallclock";  // or "oracle"
  std::vector<EpochMetrics> epochs;
  std::vector<BatchRecord> batches;  // emission order
  double sample_interval_s = 0.1;
  // conn_bytes[k][c]: response bytes delivered on connection c in interval k.
  std::vector<std::vector<std::uint64_t>> conn_bytes;
  // max over consumption prefixes of (issued - 1) / consumed.
  double transient_request_ratio = 0.0;
  std::uint64_t requests = 0;
  std::uint64_t speculative_requests = 0;
  double time_dilation = 1.0;

  // trainsim only
  std::size_t consumers = 0;
  double per_consumer_rate = 0.0;
  double duration = 0.0;
  std::size_t items_total = 0;
  double stall_time = 0.0;  // summed over consumers

  double achieved_items_per_s() const noexcept {
    return duration > 0 ? static_cast<double>(items_total) / duration : 0.0;
  }
  double stall_fraction() const noexcept {
    return duration > 0 && consumers > 0 ? stall_time / (duration * static_cast<double>(consumers)) : 0.0;
  }
  std::uint64_t epoch_checksum(std::uint64_t epoch) const noexcept;
};

// Divides every time stamp by `factor` (undoing a time-dilated run).
void rescale_time(RunMetrics& m, double factor);

// Batch waits (emit - ask) after the first `skip` batches of every epoch.
std::vector<double> post_transient_waits(const RunMetrics& m, std::size_t skip = 20);
std::vector<double> post_transient_assembly(const RunMetrics& m, std::size_t skip = 20);

double mean_epoch_throughput(const RunMetrics& m);

// Aggregate delivered bytes/s per sample interval, keeping only intervals
// that lie inside an epoch's post-transient window (emission of batch `skip`
// to the epoch's last emission).
std::vector<double> steady_throughput_series(const RunMetrics& m, std::size_t skip = 20);

// Max over prefixes of (issued - 1) / consumed, for (consumed, issued) pairs.
double transient_ratio(const std::vector<std::pair<std::size_t, std::size_t>>& consumed_issued);

// CSV writers / readers for the run directory.
void write_run(const RunMetrics& m, const std::string& dir);
RunMetrics read_run(const std::string& dir);

// key=value summary written as summary.txt.
std::map<std::string, std::string> summarize(const RunMetrics& m);

}  // namespace ooload
