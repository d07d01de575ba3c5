#pragma once

#include <cstddef>
#include <cstdint>

namespace ooload {

struct PrefetchConfig {
  std::size_t prefetch_buffers = 8;
  bool out_of_order = false;
  bool incremental_fill = false;
  std::size_t fill_stride = 4;
  std::size_t batch_size = 512;
  bool drop_last = false;
  std::uint64_t seed = 0;
  // Keep the prefetch pipeline running into the next epoch's plan while the
  // current one drains. Pools stay per epoch.
  bool continue_across_epochs = false;
  // Once every batch of an epoch has been requested, re-issue the tail of the
  // deepest connection queues on connections that run dry.
  bool speculative_drain = false;

  // Throws InvalidSpec.
  void validate() const;
};

}  // namespace ooload
