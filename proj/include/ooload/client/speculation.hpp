#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ooload/client/link_estimator.hpp"

namespace ooload {

struct SpecItem {
  std::uint64_t bytes = 0;
  double issued_at = 0.0;
  bool hedgeable = false;  // belongs to a draining epoch, not yet copied
};

// One connection as seen by the speculation planner: its estimator and the
// requests in flight on it, oldest first.
struct SpecConn {
  const LinkEstimator* estimator = nullptr;
  std::vector<SpecItem> items;
};

struct SpecMove {
  std::size_t from_conn = 0;
  std::size_t item = 0;  // index into SpecConn::items
  std::size_t to_conn = 0;
};

// Work stealing for the end of an epoch: repeatedly takes the hedgeable
// request with the latest estimated completion and copies it to the
// connection that would deliver a copy first, as long as the copy is expected
// to land `ratio` times sooner. Connections whose estimator is not ready
// neither give nor take.
std::vector<SpecMove> plan_speculation(const std::vector<SpecConn>& conns, double now,
                                       std::size_t max_inflight, double ratio = 1.0);

}  // namespace ooload
