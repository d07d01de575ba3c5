#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ooload/client/batch.hpp"
#include "ooload/client/client.hpp"
#include "ooload/core/epoch_plan.hpp"

namespace ooload {

// Fetch state of one loader for one epoch: which planned items have arrived,
// which failed, and the arrival-ordered pool used by out-of-order assembly.
// Items are indexed by their position in the flattened plan.
class EpochFetch final : public ReplyTarget, public std::enable_shared_from_this<EpochFetch> {
 public:
  EpochFetch(std::shared_ptr<const EpochPlan> plan, std::string table, bool out_of_order);

  const EpochPlan& plan() const noexcept { return *plan_; }
  const std::string& table() const noexcept { return table_; }
  bool out_of_order() const noexcept { return out_of_order_; }

  void on_reply(std::size_t index, const Reply& reply) override;
  bool hedgeable(std::size_t index) const override;

  // Bookkeeping for request_batch.
  std::size_t batch_offset(std::size_t seq) const noexcept { return offsets_[seq]; }
  void mark_requested(std::size_t seq, double when);
  std::size_t requested_batches() const;
  double first_request(std::size_t seq) const;
  // Every batch of the epoch has been requested.
  bool draining() const;

  using Deadline = std::chrono::steady_clock::time_point;

  // Blocks until planned batch `seq` has fully arrived or failed, or until
  // `deadline`. Returns false on timeout.
  bool wait_batch(std::size_t seq, Deadline deadline) const;
  // Blocks until take(n) can be answered, or until `deadline`.
  bool wait_pool(std::size_t n, Deadline deadline) const;

  struct Taken {
    std::vector<Arrival> items;
    bool drained = false;  // fewer than n remained in the epoch
    double ready_time = 0.0;
    std::vector<std::string> failed;  // failed ids once nothing else is pending
  };
  // Removes up to n earliest arrivals. Call after wait_pool returned true.
  Taken take(std::size_t n);
  // Removes the items of planned batch `seq` in plan order. Call after
  // wait_batch returned true. Throws BatchError if any item failed.
  std::vector<Arrival> take_batch(std::size_t seq, double* ready_time);

  std::size_t duplicates() const;

 private:
  bool pool_answerable(std::size_t n) const;
  static std::string failure_text(const Reply& r);

  std::shared_ptr<const EpochPlan> plan_;
  std::string table_;
  bool out_of_order_;
  std::vector<std::size_t> offsets_;  // flattened index of each batch's first item
  std::vector<std::size_t> seq_of_;   // batch of each flattened index

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<std::uint8_t> state_;  // 0 pending, 1 arrived, 2 failed, 3 consumed
  std::vector<std::optional<Arrival>> slots_;
  std::vector<std::string> errors_;
  std::vector<std::size_t> resolved_;  // per batch
  std::vector<double> complete_at_;    // per batch
  std::vector<double> first_request_;
  std::deque<std::size_t> pool_;       // arrived, not yet taken (out-of-order)
  std::size_t requested_batches_ = 0;
  std::size_t requested_items_ = 0;
  std::size_t resolved_items_ = 0;
  std::size_t failed_items_ = 0;
  std::size_t duplicates_ = 0;
};

// Token returned by request_batch.
struct PendingBatch {
  std::shared_ptr<EpochFetch> fetch;
  std::size_t seq = 0;
};

// Issues every GET of planned batch `seq` at once.
PendingBatch request_batch(StoreClient& client, const std::shared_ptr<EpochFetch>& fetch, std::size_t seq);

// Blocks until n items are available (or the epoch is drained) and removes
// the n earliest arrivals.
EpochFetch::Taken arrival_pool_take(EpochFetch& fetch, std::size_t n);

// Waits for the batch and copies it into one buffer, items in plan order.
// Throws BatchError when items failed.
Batch collect_in_order(StoreClient& client, const PendingBatch& token);

}  // namespace ooload
