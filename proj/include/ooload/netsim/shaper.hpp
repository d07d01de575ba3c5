#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <utility>

#include "ooload/core/rng.hpp"
#include "ooload/netsim/oracle.hpp"
#include "ooload/netsim/profile.hpp"

namespace ooload::netsim {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;
using Nanos = std::chrono::nanoseconds;

// Wall-clock shaping of one direction of one connection. Computes, for each
// message handed to the link, the instant it must be released to the peer.
// Same model as OracleLink, kept as a separate integer-nanosecond
// implementation so that the oracle stays an independent check.
class LinkShaper {
 public:
  LinkShaper() = default;
  LinkShaper(double bandwidth_bytes_per_s, double rtt_s, double jitter_s, std::uint64_t seed,
             std::uint64_t stream, TimePoint origin);

  bool passthrough() const noexcept { return passthrough_; }
  TimePoint schedule(TimePoint send, std::size_t bytes);

 private:
  bool passthrough_ = true;
  double rate_ = 0.0;
  Nanos one_way_{0};
  double jitter_ns_ = 0.0;
  Rng rng_{0};
  double tokens_ = 0.0;
  TimePoint tokens_at_{};
  TimePoint last_depart_{};
  TimePoint last_deliver_{};
};

// FIFO of payloads held back until their release instant.
template <typename T>
class TimedQueue {
 public:
  void push(TimePoint due, T value) { q_.emplace_back(due, std::move(value)); }
  bool empty() const noexcept { return q_.empty(); }
  std::size_t size() const noexcept { return q_.size(); }
  std::optional<TimePoint> next_due() const {
    if (q_.empty()) return std::nullopt;
    return q_.front().first;
  }
  // Pops the head if it is due at `now`.
  std::optional<T> pop_due(TimePoint now) {
    if (q_.empty() || q_.front().first > now) return std::nullopt;
    T v = std::move(q_.front().second);
    q_.pop_front();
    return v;
  }

 private:
  std::deque<std::pair<TimePoint, T>> q_;
};

// Both directions of a shaped connection. "Outbound" is what this endpoint
// writes, "inbound" what it reads; the roles of uplink/downlink depend on
// which side the shaping is applied (client or server).
struct ShapedConnection {
  LinkShaper outbound;
  LinkShaper inbound;
  bool passthrough() const noexcept { return outbound.passthrough() && inbound.passthrough(); }
};

// Builds the shaping state for connection `index` of `num_connections`.
// `client_side` selects which direction is the uplink.
ShapedConnection wrap_connection(const NetProfile& profile, std::size_t index,
                                 std::size_t num_connections, bool client_side, TimePoint origin);

}  // namespace ooload::netsim
