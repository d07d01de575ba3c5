#include "ooload/client/epoch_fetch.hpp"

#include <algorithm>

#include "ooload/core/error.hpp"

namespace ooload {

namespace {

constexpr std::uint8_t kPending = 0;
constexpr std::uint8_t kArrived = 1;
constexpr std::uint8_t kFailed = 2;
constexpr std::uint8_t kConsumed = 3;

constexpr auto kWaitSlice = std::chrono::milliseconds(50);

}  // namespace

EpochFetch::EpochFetch(std::shared_ptr<const EpochPlan> plan, std::string table, bool out_of_order)
    : plan_(std::move(plan)), table_(std::move(table)), out_of_order_(out_of_order) {
  if (!plan_) throw InvalidInput("epoch fetch needs a plan");
  const std::size_t nb = plan_->num_batches();
  offsets_.reserve(nb + 1);
  std::size_t total = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    offsets_.push_back(total);
    total += plan_->batches[b].size();
    seq_of_.insert(seq_of_.end(), plan_->batches[b].size(), b);
  }
  offsets_.push_back(total);
  state_.assign(total, kPending);
  slots_.resize(total);
  errors_.resize(total);
  resolved_.assign(nb, 0);
  complete_at_.assign(nb, 0.0);
  first_request_.assign(nb, 0.0);
}

std::string EpochFetch::failure_text(const Reply& r) {
  switch (r.outcome) {
    case Reply::Outcome::Timeout:
      return "timed out";
    case Reply::Outcome::ConnectionLost:
      return "connection lost";
    case Reply::Outcome::Response:
      break;
  }
  if (r.status == wire::Status::NotFound) return "NotFound";
  try {
    auto [kind, msg] = wire::decode_error(r.payload);
    return kind.empty() ? msg : kind + ": " + msg;
  } catch (const Error&) {
    return wire::to_string(r.status);
  }
}

void EpochFetch::on_reply(std::size_t index, const Reply& r) {
  {
    std::lock_guard lock(mu_);
    if (index >= state_.size()) return;
    if (state_[index] != kPending) {
      ++duplicates_;
      return;
    }
  }
  std::optional<Arrival> arrival;
  std::string error;
  if (r.outcome == Reply::Outcome::Response && r.status == wire::Status::Ok) {
    try {
      const auto g = wire::parse_get_payload(r.payload);
      arrival.emplace();
      arrival->id = plan_->batches[seq_of_[index]][index - offsets_[seq_of_[index]]];
      arrival->label = Label::decode(g.label_kind, g.label);
      arrival->data.assign(g.data.begin(), g.data.end());
      arrival->arrived_at = r.arrived_at;
    } catch (const Error& e) {
      arrival.reset();
      error = std::string(e.kind()) + ": " + e.what();
    }
  } else {
    error = failure_text(r);
  }

  std::lock_guard lock(mu_);
  if (state_[index] != kPending) {
    ++duplicates_;
    return;
  }
  const std::size_t seq = seq_of_[index];
  if (arrival) {
    state_[index] = kArrived;
    slots_[index] = std::move(arrival);
    if (out_of_order_) pool_.push_back(index);
  } else {
    state_[index] = kFailed;
    errors_[index] = std::move(error);
    ++failed_items_;
  }
  ++resolved_items_;
  if (++resolved_[seq] == plan_->batches[seq].size()) complete_at_[seq] = r.arrived_at;
  cv_.notify_all();
}

bool EpochFetch::hedgeable(std::size_t index) const {
  std::lock_guard lock(mu_);
  return requested_batches_ == plan_->num_batches() && index < state_.size() && state_[index] == kPending;
}

void EpochFetch::mark_requested(std::size_t seq, double when) {
  std::lock_guard lock(mu_);
  if (seq != requested_batches_) throw StateError("batches must be requested in plan order");
  first_request_[seq] = when;
  ++requested_batches_;
  requested_items_ += plan_->batches[seq].size();
  cv_.notify_all();
}

std::size_t EpochFetch::requested_batches() const {
  std::lock_guard lock(mu_);
  return requested_batches_;
}

double EpochFetch::first_request(std::size_t seq) const {
  std::lock_guard lock(mu_);
  return first_request_[seq];
}

bool EpochFetch::draining() const {
  std::lock_guard lock(mu_);
  return requested_batches_ == plan_->num_batches();
}

std::size_t EpochFetch::duplicates() const {
  std::lock_guard lock(mu_);
  return duplicates_;
}

bool EpochFetch::wait_batch(std::size_t seq, Deadline deadline) const {
  std::unique_lock lock(mu_);
  return cv_.wait_until(lock, deadline, [&] {
    return seq < requested_batches_ && resolved_[seq] == plan_->batches[seq].size();
  });
}

bool EpochFetch::pool_answerable(std::size_t n) const {
  if (pool_.size() >= n) return true;
  return requested_batches_ == plan_->num_batches() && resolved_items_ == requested_items_;
}

bool EpochFetch::wait_pool(std::size_t n, Deadline deadline) const {
  std::unique_lock lock(mu_);
  return cv_.wait_until(lock, deadline, [&] { return pool_answerable(n); });
}

EpochFetch::Taken EpochFetch::take(std::size_t n) {
  std::lock_guard lock(mu_);
  if (!pool_answerable(n)) throw StateError("arrival pool cannot answer take yet");
  Taken out;
  const std::size_t k = std::min(n, pool_.size());
  out.items.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t idx = pool_.front();
    pool_.pop_front();
    out.items.push_back(std::move(*slots_[idx]));
    slots_[idx].reset();
    state_[idx] = kConsumed;
    out.ready_time = std::max(out.ready_time, out.items.back().arrived_at);
  }
  out.drained = k < n;
  if (out.drained && failed_items_ > 0) {
    for (std::size_t idx = 0; idx < state_.size(); ++idx) {
      if (state_[idx] == kFailed) out.failed.push_back(plan_->batches[seq_of_[idx]][idx - offsets_[seq_of_[idx]]].str() + " (" + errors_[idx] + ")");
    }
  }
  return out;
}

std::vector<Arrival> EpochFetch::take_batch(std::size_t seq, double* ready_time) {
  std::lock_guard lock(mu_);
  const auto& ids = plan_->batches[seq];
  if (seq >= requested_batches_ || resolved_[seq] != ids.size()) {
    throw StateError("batch " + std::to_string(seq) + " is not complete");
  }
  std::vector<std::string> failed;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t idx = offsets_[seq] + i;
    if (state_[idx] == kFailed) failed.push_back(ids[i].str() + " (" + errors_[idx] + ")");
  }
  if (!failed.empty()) {
    auto what = "batch " + std::to_string(seq) + ": " + std::to_string(failed.size()) +
                " item(s) failed, first " + failed.front();
    throw BatchError(what, std::move(failed));
  }
  std::vector<Arrival> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t idx = offsets_[seq] + i;
    if (state_[idx] != kArrived) throw StateError("batch item consumed twice");
    out.push_back(std::move(*slots_[idx]));
    slots_[idx].reset();
    state_[idx] = kConsumed;
  }
  if (ready_time != nullptr) *ready_time = complete_at_[seq];
  return out;
}

PendingBatch request_batch(StoreClient& client, const std::shared_ptr<EpochFetch>& fetch, std::size_t seq) {
  const auto& ids = fetch->plan().batches.at(seq);
  if (ids.empty()) throw InvalidInput("cannot request an empty batch");
  fetch->mark_requested(seq, client.now());
  client.submit_gets(fetch->table(), ids, fetch, fetch->batch_offset(seq));
  return PendingBatch{fetch, seq};
}

EpochFetch::Taken arrival_pool_take(EpochFetch& fetch, std::size_t n) {
  while (!fetch.wait_pool(n, std::chrono::steady_clock::now() + kWaitSlice)) {
  }
  return fetch.take(n);
}

Batch collect_in_order(StoreClient& client, const PendingBatch& token) {
  auto& fetch = *token.fetch;
  while (!fetch.wait_batch(token.seq, std::chrono::steady_clock::now() + kWaitSlice)) {
  }
  Batch out;
  out.epoch = fetch.plan().epoch_index;
  out.seq = token.seq;
  out.request_time = fetch.first_request(token.seq);
  auto items = fetch.take_batch(token.seq, &out.ready_time);
  std::vector<const Arrival*> ptrs;
  ptrs.reserve(items.size());
  for (const auto& a : items) ptrs.push_back(&a);
  out.buffer = assemble_batch(ptrs, client.copy_pool());
  return out;
}

}  // namespace ooload
