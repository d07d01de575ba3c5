#include "ooload/netsim/shaper.hpp"

#include <algorithm>
#include <cmath>

namespace ooload::netsim {

namespace {

Nanos to_nanos(double seconds) {
  return Nanos(static_cast<std::int64_t>(std::llround(seconds * 1e9)));
}

}  // namespace

LinkShaper::LinkShaper(double bandwidth_bytes_per_s, double rtt_s, double jitter_s,
                       std::uint64_t seed, std::uint64_t stream, TimePoint origin)
    : passthrough_(bandwidth_bytes_per_s <= 0.0 && rtt_s <= 0.0 && jitter_s <= 0.0),
      rate_(bandwidth_bytes_per_s),
      one_way_(to_nanos(rtt_s / 2.0)),
      jitter_ns_(jitter_s * 1e9),
      rng_(seed, stream),
      tokens_at_(origin),
      last_depart_(origin),
      last_deliver_(origin) {}

TimePoint LinkShaper::schedule(TimePoint send, std::size_t bytes) {
  if (passthrough_) return send;
  TimePoint start = std::max(send, last_depart_);
  TimePoint depart = start;
  if (rate_ > 0.0) {
    const double elapsed_ns = static_cast<double>((start - tokens_at_).count());
    tokens_ = std::min(kTokenBucketBurstBytes, tokens_ + rate_ * elapsed_ns * 1e-9);
    const auto need = static_cast<double>(bytes);
    if (tokens_ >= need) {
      tokens_ -= need;
    } else {
      depart = start + to_nanos((need - tokens_) / rate_);
      tokens_ = 0.0;
    }
    tokens_at_ = depart;
  }
  last_depart_ = depart;
  Nanos delay = one_way_;
  if (jitter_ns_ > 0.0) {
    delay += Nanos(static_cast<std::int64_t>(std::llround(std::abs(rng_.normal()) * jitter_ns_)));
  }
  last_deliver_ = std::max(last_deliver_, depart + delay);
  return last_deliver_;
}

ShapedConnection wrap_connection(const NetProfile& profile, std::size_t index,
                                 std::size_t num_connections, bool client_side, TimePoint origin) {
  const double bw = profile.link_bandwidth(index, num_connections);
  const auto make = [&](Direction dir) {
    return LinkShaper(bw, profile.rtt_s, profile.jitter_s, profile.seed, jitter_stream(index, dir),
                      origin);
  };
  ShapedConnection c;
  c.outbound = make(client_side ? Direction::Uplink : Direction::Downlink);
  c.inbound = make(client_side ? Direction::Downlink : Direction::Uplink);
  return c;
}

}  // namespace ooload::netsim
