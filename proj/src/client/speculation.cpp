#include "ooload/client/speculation.hpp"

#include <algorithm>

namespace ooload {

std::vector<SpecMove> plan_speculation(const std::vector<SpecConn>& conns, double now,
                                       std::size_t max_inflight, double ratio) {
  const std::size_t n = conns.size();
  std::vector<std::vector<double>> finish(n);
  std::vector<std::ptrdiff_t> tail(n, -1);
  std::vector<double> extra_bytes(n, 0.0);
  std::vector<std::size_t> load(n, 0);
  for (std::size_t c = 0; c < n; ++c) {
    const auto& conn = conns[c];
    load[c] = conn.items.size();
    if (conn.estimator == nullptr || !conn.estimator->ready()) continue;
    const double spb = conn.estimator->seconds_per_byte();
    const double floor = conn.estimator->min_latency();
    double prefix = 0.0;
    finish[c].reserve(conn.items.size());
    for (const auto& item : conn.items) {
      prefix += static_cast<double>(item.bytes);
      finish[c].push_back(std::max(item.issued_at + floor, now + prefix * spb));
    }
    extra_bytes[c] = prefix;
    tail[c] = static_cast<std::ptrdiff_t>(conn.items.size()) - 1;
  }

  const auto next_tail = [&](std::size_t c) {
    while (tail[c] >= 0 && !conns[c].items[static_cast<std::size_t>(tail[c])].hedgeable) --tail[c];
  };
  for (std::size_t c = 0; c < n; ++c) next_tail(c);

  std::vector<SpecMove> moves;
  for (;;) {
    std::size_t victim = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (tail[c] < 0) continue;
      if (victim == n || finish[c][static_cast<std::size_t>(tail[c])] >
                             finish[victim][static_cast<std::size_t>(tail[victim])]) {
        victim = c;
      }
    }
    if (victim == n) break;
    const auto item = static_cast<std::size_t>(tail[victim]);
    const double victim_left = finish[victim][item] - now;
    const auto bytes = static_cast<double>(conns[victim].items[item].bytes);

    std::size_t target = n;
    double target_left = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (c == victim || load[c] >= max_inflight) continue;
      const auto* est = conns[c].estimator;
      if (est == nullptr || !est->ready()) continue;
      const double left = est->min_latency() + (extra_bytes[c] + bytes) * est->seconds_per_byte();
      if (target == n || left < target_left) {
        target = c;
        target_left = left;
      }
    }
    if (target == n || victim_left <= ratio * target_left) break;
    moves.push_back({victim, item, target});
    extra_bytes[target] += bytes;
    ++load[target];
    --tail[victim];
    next_tail(victim);
  }
  return moves;
}

}  // namespace ooload
