#include "ooload/netsim/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "ooload/core/error.hpp"

namespace ooload::netsim {

OracleLink::OracleLink(double bandwidth_bytes_per_s, double rtt_s, double jitter_s,
                       std::uint64_t seed, std::uint64_t stream)
    : rate_(bandwidth_bytes_per_s), one_way_(rtt_s / 2.0), jitter_(jitter_s), rng_(seed, stream) {}

double OracleLink::transmit(double send_time, std::size_t bytes) {
  const double start = std::max(send_time, last_depart_);
  double depart = start;
  if (rate_ > 0.0) {
    tokens_ = std::min(kTokenBucketBurstBytes, tokens_ + rate_ * (start - tokens_at_));
    const auto need = static_cast<double>(bytes);
    if (tokens_ >= need) {
      tokens_ -= need;
    } else {
      depart = start + (need - tokens_) / rate_;
      tokens_ = 0.0;
    }
    tokens_at_ = depart;
  }
  last_depart_ = depart;
  double delay = one_way_;
  if (jitter_ > 0.0) delay += std::abs(rng_.normal()) * jitter_;
  last_deliver_ = std::max(last_deliver_, depart + delay);
  return last_deliver_;
}

OracleLink make_oracle_link(const NetProfile& profile, std::size_t index, std::size_t num_connections,
                            Direction dir) {
  return OracleLink(profile.link_bandwidth(index, num_connections), profile.rtt_s, profile.jitter_s,
                    profile.seed, jitter_stream(index, dir));
}

std::vector<DeliveryEvent> oracle_simulate(std::span<const ScheduledSend> schedule,
                                           const NetProfile& profile, std::size_t num_connections,
                                           Direction dir) {
  if (num_connections == 0) {
    for (const auto& s : schedule) num_connections = std::max(num_connections, s.connection_index + 1);
  }
  std::vector<OracleLink> links;
  links.reserve(num_connections);
  for (std::size_t i = 0; i < num_connections; ++i) {
    links.push_back(make_oracle_link(profile, i, num_connections, dir));
  }
  std::vector<DeliveryEvent> out;
  out.reserve(schedule.size());
  for (const auto& s : schedule) {
    if (s.connection_index >= num_connections) {
      throw InvalidInput("schedule references connection " + std::to_string(s.connection_index));
    }
    const double deliver = links[s.connection_index].transmit(s.send_time, s.bytes);
    out.push_back({s.connection_index, s.bytes, s.send_time, deliver});
  }
  return out;
}

}  // namespace ooload::netsim
