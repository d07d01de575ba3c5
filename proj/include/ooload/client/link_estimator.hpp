#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>

namespace ooload {

// Online estimate of one connection's round-trip floor and per-byte transfer
// cost, from response arrivals only. Times are seconds on any monotonic base.
class LinkEstimator {
 public:
  void on_response(double now, double issued_at, std::uint64_t bytes) noexcept {
    const double latency = now - issued_at;
    if (latency >= 0.0) min_latency_ = std::min(min_latency_, latency);
    // A response that would already have been delivered by the previous
    // arrival had it not been queued was waiting behind it, so the gap is
    // its own transfer time.
    if (has_prev_ && bytes > 0 && issued_at + min_latency_ <= prev_arrival_) {
      const double per_byte = (now - prev_arrival_) / static_cast<double>(bytes);
      per_byte_ = samples_ == 0 ? per_byte : per_byte_ + kAlpha * (per_byte - per_byte_);
      ++samples_;
    }
    prev_arrival_ = now;
    has_prev_ = true;
  }

  bool ready() const noexcept { return samples_ >= kMinSamples; }
  double min_latency() const noexcept { return has_prev_ ? min_latency_ : 0.0; }
  double seconds_per_byte() const noexcept { return per_byte_; }

 private:
  static constexpr double kAlpha = 0.1;
  static constexpr std::uint64_t kMinSamples = 8;

  double min_latency_ = std::numeric_limits<double>::infinity();
  double per_byte_ = 0.0;
  double prev_arrival_ = 0.0;
  bool has_prev_ = false;
  std::uint64_t samples_ = 0;
};

}  // namespace ooload
