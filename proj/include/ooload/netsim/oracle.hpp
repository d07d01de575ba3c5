#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ooload/core/rng.hpp"
#include "ooload/netsim/profile.hpp"

namespace ooload::netsim {

enum class Direction : std::uint8_t { Uplink = 0, Downlink = 1 };

// Jitter stream of one link direction; shared by the oracle and the real-time
// shaper so both draw identical delays.
constexpr std::uint64_t jitter_stream(std::size_t connection_index, Direction dir) noexcept {
  return static_cast<std::uint64_t>(connection_index) * 2 + static_cast<std::uint64_t>(dir);
}

struct ScheduledSend {
  std::size_t connection_index = 0;
  std::size_t bytes = 0;
  double send_time = 0.0;
};

struct DeliveryEvent {
  std::size_t connection_index = 0;
  std::size_t bytes = 0;
  double send_time = 0.0;
  double deliver_time = 0.0;
};

// Virtual-time model of one direction of one connection: FIFO, fluid token
// bucket (rate = bandwidth, 64 KiB burst, empty at t = 0), then a one-way
// delay of rtt/2 plus a half-normal jitter draw.
class OracleLink {
 public:
  OracleLink() = default;
  OracleLink(double bandwidth_bytes_per_s, double rtt_s, double jitter_s, std::uint64_t seed,
             std::uint64_t stream);

  // send_time must be non-decreasing across calls. Returns the delivery time.
  double transmit(double send_time, std::size_t bytes);

  // Time at which the last byte handed so far leaves the bucket.
  double busy_until() const noexcept { return last_depart_; }

 private:
  double rate_ = 0.0;  // 0 = unlimited
  double one_way_ = 0.0;
  double jitter_ = 0.0;
  Rng rng_{0};
  double tokens_ = 0.0;
  double tokens_at_ = 0.0;
  double last_depart_ = 0.0;
  double last_deliver_ = 0.0;
};

OracleLink make_oracle_link(const NetProfile& profile, std::size_t index, std::size_t num_connections,
                            Direction dir);

// Pure discrete-event computation of delivery times for a schedule of sends
// on `num_connections` links (0 = infer from the largest index). Output is in
// schedule order.
std::vector<DeliveryEvent> oracle_simulate(std::span<const ScheduledSend> schedule,
                                           const NetProfile& profile,
                                           std::size_t num_connections = 0,
                                           Direction dir = Direction::Downlink);

}  // namespace ooload::netsim
