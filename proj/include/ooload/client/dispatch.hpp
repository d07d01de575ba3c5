#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace ooload {

inline constexpr std::size_t kNoConnection = std::numeric_limits<std::size_t>::max();

// Least-loaded connection choice by outstanding request count. Ties go to the
// first candidate at or after `cursor`, so equal loads are filled round-robin.
// Returns kNoConnection when every connection is at `cap`.
template <typename Count>
std::size_t pick_least_loaded(std::span<const Count> outstanding, std::size_t cap,
                              std::size_t cursor) noexcept {
  const std::size_t n = outstanding.size();
  std::size_t best = kNoConnection;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = (cursor + k) % n;
    const auto load = static_cast<std::size_t>(outstanding[i]);
    if (load >= cap) continue;
    if (best == kNoConnection || load < static_cast<std::size_t>(outstanding[best])) best = i;
  }
  return best;
}

}  // namespace ooload
