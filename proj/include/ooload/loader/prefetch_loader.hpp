#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ooload/client/batch.hpp"
#include "ooload/client/client.hpp"
#include "ooload/client/epoch_fetch.hpp"
#include "ooload/loader/config.hpp"
#include "ooload/loader/fill_schedule.hpp"

namespace ooload {

// Request counters right after a batch was handed out. `consumed` and
// `issued` count batches since the loader was created.
struct LoaderIssue {
  std::uint64_t epoch = 0;
  std::size_t consumed = 0;
  std::size_t issued = 0;
  std::size_t outstanding = 0;
};

// Epoch/batch iterator over a store table. One consumer thread per instance;
// several instances may share one client.
class PrefetchLoader {
 public:
  PrefetchLoader(std::shared_ptr<StoreClient> client, std::string table, PrefetchConfig config);

  const PrefetchConfig& config() const noexcept { return cfg_; }

  // Plans the epoch and issues the initial prefetch. Throws InvalidInput on
  // empty ids and StateError while another epoch is still running.
  void start_epoch(std::vector<SampleId> ids, std::uint64_t epoch_index);

  // Next batch of the running epoch, std::nullopt once it is exhausted.
  // Throws BatchError when items failed after retries.
  std::optional<Batch> next_batch();

  // Batches requested but not yet handed out, across epochs.
  std::size_t outstanding() const;
  bool epoch_running() const noexcept { return running_; }
  std::uint64_t current_epoch() const noexcept { return current_; }

  const std::vector<LoaderIssue>& issue_log() const noexcept { return issues_; }
  std::size_t issued_total() const noexcept { return issued_total_; }
  std::size_t consumed_total() const noexcept { return consumed_total_; }

  // Range over the batches of one epoch: `for (Batch& b : loader.epoch_iter(ids, e))`.
  class EpochRange;
  EpochRange epoch_iter(std::vector<SampleId> ids, std::uint64_t epoch_index);

 private:
  struct EpochState {
    std::shared_ptr<EpochFetch> fetch;
    std::size_t consumed = 0;
    std::size_t requested = 0;
  };

  EpochState& ensure_epoch(std::uint64_t e);
  void request_next(EpochState& st);
  void top_up();
  void maybe_speculate();

  std::shared_ptr<StoreClient> client_;
  std::string table_;
  PrefetchConfig cfg_;
  FillSchedule fill_;
  std::vector<SampleId> ids_;
  std::map<std::uint64_t, EpochState> epochs_;
  std::uint64_t current_ = 0;
  bool running_ = false;
  std::size_t consumed_total_ = 0;
  std::size_t issued_total_ = 0;
  std::vector<LoaderIssue> issues_;
};

class PrefetchLoader::EpochRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Batch;
    using difference_type = std::ptrdiff_t;
    using pointer = Batch*;
    using reference = Batch&;

    iterator() = default;
    explicit iterator(PrefetchLoader* loader) : loader_(loader) { advance(); }
    Batch& operator*() { return *current_; }
    Batch* operator->() { return &*current_; }
    iterator& operator++() {
      advance();
      return *this;
    }
    bool operator==(const iterator& o) const noexcept { return done() == o.done(); }

   private:
    bool done() const noexcept { return !current_.has_value(); }
    void advance() { current_ = loader_->next_batch(); }

    PrefetchLoader* loader_ = nullptr;
    std::optional<Batch> current_;
  };

  explicit EpochRange(PrefetchLoader* loader) : loader_(loader) {}
  iterator begin() { return iterator(loader_); }
  iterator end() { return iterator(); }

 private:
  PrefetchLoader* loader_;
};

}  // namespace ooload
