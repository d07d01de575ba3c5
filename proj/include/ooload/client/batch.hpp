#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ooload/core/records.hpp"
#include "ooload/core/thread_pool.hpp"

namespace ooload {

struct BatchItem {
  SampleId id;
  Label label;
  std::size_t offset = 0;
  std::size_t length = 0;
};

// One contiguous allocation holding every item of a batch, plus a directory.
struct BatchBuffer {
  Blob storage;
  std::vector<BatchItem> items;

  std::size_t size() const noexcept { return items.size(); }
  std::span<const std::uint8_t> data(std::size_t i) const {
    return {storage.data() + items[i].offset, items[i].length};
  }
};

// An item as it came off the wire, before it is copied into a batch.
struct Arrival {
  SampleId id;
  Label label;
  Blob data;
  double arrived_at = 0.0;
};

// Allocates the buffer once and copies the items in parallel; offsets follow
// the order of `items`.
BatchBuffer assemble_batch(std::span<const Arrival* const> items, ThreadPool& pool);

struct Batch {
  std::uint64_t epoch = 0;
  std::size_t seq = 0;  // emission index within the epoch
  BatchBuffer buffer;
  double request_time = 0.0;  // first request of planned batch `seq`
  double ready_time = 0.0;    // last item needed was available
  double ask_time = 0.0;      // consumer called next_batch
  double emit_time = 0.0;     // next_batch returned
  bool partial = false;       // shorter than planned (out-of-order drain)

  std::size_t size() const noexcept { return buffer.size(); }
  std::uint64_t bytes() const noexcept { return buffer.storage.size(); }
  double assembly_time() const noexcept { return ready_time - request_time; }
  double wait_time() const noexcept { return emit_time - ask_time; }
  // Sum of item_checksum over the items.
  std::uint64_t checksum() const noexcept;
};

}  // namespace ooload
