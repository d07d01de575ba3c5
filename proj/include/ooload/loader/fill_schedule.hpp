#pragma once

#include <algorithm>
#include <cstddef>

namespace ooload {

// Number of batches a loader keeps outstanding after `consumed` batches have
// been handed to the consumer. Without incremental fill the pipeline is filled
// at once; with it, the target starts at one batch and grows by one for every
// `stride` consumed batches until `buffers` is reached.
class FillSchedule {
 public:
  FillSchedule(std::size_t buffers, bool incremental, std::size_t stride) noexcept
      : buffers_(std::max<std::size_t>(buffers, 1)),
        incremental_(incremental),
        stride_(std::max<std::size_t>(stride, 1)) {}

  std::size_t initial() const noexcept { return incremental_ ? 1 : buffers_; }

  std::size_t target(std::size_t consumed) const noexcept {
    if (!incremental_) return buffers_;
    return std::min(buffers_, 1 + consumed / stride_);
  }

  // Batches issued once `consumed` batches have been emitted, for an epoch of
  // `num_batches` batches.
  std::size_t issued_after(std::size_t consumed, std::size_t num_batches) const noexcept {
    return std::min(num_batches, consumed + target(consumed));
  }

  std::size_t buffers() const noexcept { return buffers_; }
  bool incremental() const noexcept { return incremental_; }
  std::size_t stride() const noexcept { return stride_; }

 private:
  std::size_t buffers_;
  bool incremental_;
  std::size_t stride_;
};

}  // namespace ooload
