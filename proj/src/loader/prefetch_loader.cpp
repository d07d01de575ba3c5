#include "ooload/loader/prefetch_loader.hpp"

#include <chrono>

#include "ooload/core/epoch_plan.hpp"
#include "ooload/core/error.hpp"

namespace ooload {

namespace {

constexpr auto kIdleSlice = std::chrono::milliseconds(50);
// Poll interval while an epoch drains, so speculation follows arrivals.
constexpr auto kDrainSlice = std::chrono::milliseconds(2);

}  // namespace

PrefetchLoader::PrefetchLoader(std::shared_ptr<StoreClient> client, std::string table,
                               PrefetchConfig config)
    : client_(std::move(client)),
      table_(std::move(table)),
      cfg_(config),
      fill_(config.prefetch_buffers, config.incremental_fill, config.fill_stride) {
  if (!client_) throw InvalidInput("loader needs a client");
  if (table_.empty()) throw InvalidInput("loader needs a table name");
  cfg_.validate();
}

PrefetchLoader::EpochState& PrefetchLoader::ensure_epoch(std::uint64_t e) {
  auto it = epochs_.find(e);
  if (it != epochs_.end()) return it->second;
  auto plan = std::make_shared<const EpochPlan>(
      make_epoch_plan(ids_, cfg_.batch_size, cfg_.seed, e, cfg_.drop_last));
  EpochState st;
  st.fetch = std::make_shared<EpochFetch>(std::move(plan), table_, cfg_.out_of_order);
  return epochs_.emplace(e, std::move(st)).first->second;
}

void PrefetchLoader::start_epoch(std::vector<SampleId> ids, std::uint64_t epoch_index) {
  if (ids.empty()) throw InvalidInput("start_epoch needs at least one id");
  if (running_) throw StateError("epoch " + std::to_string(current_) + " is still running");
  if (ids != ids_) {
    // Prefetched state belongs to the old id list; late replies land in the
    // dropped fetch objects.
    epochs_.clear();
    ids_ = std::move(ids);
  }
  for (auto it = epochs_.begin(); it != epochs_.end();) {
    it = it->first == epoch_index ? std::next(it) : epochs_.erase(it);
  }
  current_ = epoch_index;
  running_ = true;
  ensure_epoch(epoch_index);
  top_up();
}

void PrefetchLoader::request_next(EpochState& st) {
  request_batch(*client_, st.fetch, st.requested);
  ++st.requested;
  ++issued_total_;
}

std::size_t PrefetchLoader::outstanding() const {
  std::size_t n = 0;
  for (const auto& [e, st] : epochs_) n += st.requested - st.consumed;
  return n;
}

void PrefetchLoader::top_up() {
  auto& cur = epochs_.at(current_);
  const std::size_t nb = cur.fetch->plan().num_batches();
  const bool carry = cfg_.continue_across_epochs;
  const std::size_t target = fill_.target(carry ? consumed_total_ : cur.consumed);
  std::size_t out = cur.requested - cur.consumed;
  const bool was_draining = cur.requested == nb;
  while (out < target && cur.requested < nb) {
    request_next(cur);
    ++out;
  }
  if (carry && cur.requested == nb) {
    auto& next = ensure_epoch(current_ + 1);
    const std::size_t nnb = next.fetch->plan().num_batches();
    out += next.requested - next.consumed;
    while (out < target && next.requested < nnb) {
      request_next(next);
      ++out;
    }
  }
  if (!was_draining && cur.requested == nb) maybe_speculate();
}

void PrefetchLoader::maybe_speculate() {
  if (cfg_.speculative_drain) client_->speculate();
}

std::optional<Batch> PrefetchLoader::next_batch() {
  if (!running_) return std::nullopt;
  auto& st = epochs_.at(current_);
  auto& fetch = *st.fetch;
  const auto& plan = fetch.plan();
  const double ask = client_->now();
  const std::size_t k = st.consumed;
  if (k == plan.num_batches()) {
    // drop_last can leave an epoch without batches.
    running_ = false;
    epochs_.erase(current_);
    return std::nullopt;
  }
  const std::size_t need = plan.batches[k].size();
  const auto slice = [&] {
    return std::chrono::steady_clock::now() +
           (cfg_.speculative_drain && fetch.draining() ? kDrainSlice : kIdleSlice);
  };

  Batch out;
  out.epoch = current_;
  out.seq = k;
  out.ask_time = ask;
  if (cfg_.out_of_order) {
    while (!fetch.wait_pool(need, slice())) {
      if (fetch.draining()) maybe_speculate();
    }
    auto taken = fetch.take(need);
    if (!taken.failed.empty()) {
      auto what = "epoch " + std::to_string(current_) + ": " + std::to_string(taken.failed.size()) +
                  " item(s) failed, first " + taken.failed.front();
      throw BatchError(what, std::move(taken.failed));
    }
    out.request_time = fetch.first_request(k);
    out.ready_time = taken.ready_time;
    out.partial = taken.items.size() < need;
    std::vector<const Arrival*> ptrs;
    ptrs.reserve(taken.items.size());
    for (const auto& a : taken.items) ptrs.push_back(&a);
    out.buffer = assemble_batch(ptrs, client_->copy_pool());
  } else {
    while (!fetch.wait_batch(k, slice())) {
      if (fetch.draining()) maybe_speculate();
    }
    out.request_time = fetch.first_request(k);
    auto items = fetch.take_batch(k, &out.ready_time);
    std::vector<const Arrival*> ptrs;
    ptrs.reserve(items.size());
    for (const auto& a : items) ptrs.push_back(&a);
    out.buffer = assemble_batch(ptrs, client_->copy_pool());
  }
  ++st.consumed;
  ++consumed_total_;
  top_up();
  issues_.push_back({current_, consumed_total_, issued_total_, outstanding()});
  if (st.consumed == plan.num_batches()) {
    running_ = false;
    epochs_.erase(current_);
  }
  out.emit_time = client_->now();
  return out;
}

PrefetchLoader::EpochRange PrefetchLoader::epoch_iter(std::vector<SampleId> ids, std::uint64_t epoch_index) {
  start_epoch(std::move(ids), epoch_index);
  return EpochRange(this);
}

}  // namespace ooload
