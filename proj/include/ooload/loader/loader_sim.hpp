#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ooload/core/sample_id.hpp"
#include "ooload/loader/config.hpp"
#include "ooload/netsim/profile.hpp"

namespace ooload::sim {

// Items one loader iterates over, with the size in bytes of each item's GET
// response frame.
struct SimShard {
  std::vector<SampleId> ids;
  std::vector<std::uint64_t> response_bytes;
  // Bytes a batch reports per item (the stored payload); empty means
  // response_bytes.
  std::vector<std::uint64_t> payload_bytes;
};

struct LoaderSimConfig {
  PrefetchConfig prefetch;
  netsim::NetProfile profile;
  std::size_t num_connections = 32;
  std::size_t max_inflight = 1024;
  std::size_t epochs = 1;
  std::uint64_t first_epoch = 0;
  // Consumer work per emitted item; 0 is a tight loop.
  double consumer_item_time_s = 0.0;
  double server_service_time_s = 0.0;
  std::uint64_t request_bytes = 45;
  double sample_interval_s = 0.1;
  bool record_items = false;
};

struct SimBatch {
  std::size_t loader = 0;
  std::uint64_t epoch = 0;
  std::size_t seq = 0;
  std::size_t items = 0;
  std::uint64_t bytes = 0;
  double request_time = 0.0;  // first request of the planned batch `seq`
  double ready_time = 0.0;    // last needed item arrived
  double ask_time = 0.0;      // consumer asked for the batch
  double emit_time = 0.0;
  std::vector<SampleId> ids;  // filled when record_items is set

  double assembly_time() const noexcept { return ready_time - request_time; }
  double wait_time() const noexcept { return emit_time - ask_time; }
};

// Batches issued (in epoch-local units) right after a batch was emitted.
struct IssueRecord {
  std::size_t loader = 0;
  std::uint64_t epoch = 0;
  std::size_t consumed = 0;
  std::size_t issued = 0;
  std::size_t outstanding = 0;
};

struct EpochSpan {
  std::size_t loader = 0;
  std::uint64_t epoch = 0;
  double start = 0.0;
  double end = 0.0;
  std::uint64_t bytes = 0;
  std::size_t items = 0;
};

struct SimResult {
  std::vector<SimBatch> batches;  // emission order
  std::vector<IssueRecord> issues;
  std::vector<EpochSpan> epochs;
  // conn_bytes[k][c]: response bytes delivered on connection c during sample
  // interval k.
  std::vector<std::vector<std::uint64_t>> conn_bytes;
  double sample_interval_s = 0.1;
  double end_time = 0.0;
  std::size_t requests = 0;
  std::size_t speculative_requests = 0;
  std::size_t duplicate_responses = 0;
  std::size_t max_inflight_seen = 0;
};

// Virtual-time replay of the prefetch loader (one per shard) over a shared
// pool of shaped connections. Uses the same fill schedule, connection picker
// and link model as the real implementation, without threads or sockets.
SimResult simulate_loaders(const std::vector<SimShard>& shards, const LoaderSimConfig& config);

// Convenience: aggregate delivered bytes per sample interval.
std::vector<double> aggregate_series(const SimResult& r);

}  // namespace ooload::sim
