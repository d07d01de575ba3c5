#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ooload/bench/metrics.hpp"
#include "ooload/core/sample_id.hpp"
#include "ooload/loader/config.hpp"
#include "ooload/netsim/profile.hpp"

namespace ooload {

struct RunOptions {
  std::vector<std::string> endpoints;
  std::string table = "samples";
  PrefetchConfig prefetch;
  std::size_t io_workers = 16;
  std::size_t connections_per_worker = 2;
  std::size_t max_inflight_per_connection = 1024;
  std::size_t copy_threads = 0;
  netsim::NetProfile profile;  // identity unless set
  // Wall-clock runs slow every simulated duration down by this factor (and
  // divide every rate by it), then report times divided by it. Lets a small
  // machine stand in for links faster than it can copy.
  double time_dilation = 1.0;
  std::size_t epochs = 1;
  std::uint64_t first_epoch = 0;
  double sample_interval_s = 0.1;
  // Set by a signal handler; the running epoch is then flagged partial.
  const std::atomic<bool>* interrupt = nullptr;

  std::size_t total_connections() const noexcept { return io_workers * connections_per_worker; }
};

struct TrainSimOptions {
  std::size_t consumers = 8;
  double per_consumer_rate = 1400.0;  // items/s; 0 = unlimited
};

// Consumes every batch as fast as possible and checksums it.
RunMetrics run_tightloop(const RunOptions& opts, const std::vector<SampleId>& ids);

// `consumers` loaders share one client; loader k reads ids[i] with
// i % consumers == k, and each batch costs items / per_consumer_rate seconds
// of consumer time.
RunMetrics run_trainsim(const RunOptions& opts, const TrainSimOptions& train,
                        const std::vector<SampleId>& ids);

// Same runs replayed by the discrete-event oracle. data_bytes[i] is the
// payload size of ids[i].
RunMetrics simulate_tightloop(const RunOptions& opts, const std::vector<SampleId>& ids,
                              const std::vector<std::uint64_t>& data_bytes);
RunMetrics simulate_trainsim(const RunOptions& opts, const TrainSimOptions& train,
                             const std::vector<SampleId>& ids, const std::vector<std::uint64_t>& data_bytes);

// Size of the GET response frame carrying `data_bytes` with an integer label.
std::uint64_t get_response_bytes(std::uint64_t data_bytes);

}  // namespace ooload
