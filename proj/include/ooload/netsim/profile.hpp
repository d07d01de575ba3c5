#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ooload::netsim {

// Per-connection network conditions. Durations are in seconds, bandwidth in
// bytes per second (0 means unlimited).
struct NetProfile {
  std::string name = "identity";
  double rtt_s = 0.0;
  double bandwidth_bytes_per_s = 0.0;
  double congested_fraction = 0.0;
  double congestion_factor = 1.0;
  double jitter_s = 0.0;
  std::uint64_t seed = 0;

  bool is_identity() const noexcept {
    return rtt_s == 0.0 && bandwidth_bytes_per_s == 0.0 && jitter_s == 0.0;
  }
  bool unlimited() const noexcept { return bandwidth_bytes_per_s <= 0.0; }

  // Throws InvalidSpec on out-of-range fields.
  void validate() const;

  // Number of congested connections among n: floor(congested_fraction * n).
  std::size_t congested_count(std::size_t n) const noexcept;

  // mask[i] is true iff connection i is congested. The subset is picked by a
  // seeded hash of the connection index, so it is stable across runs.
  std::vector<bool> congested_mask(std::size_t n) const;

  // Bandwidth of connection `index` out of n (0 = unlimited).
  double link_bandwidth(std::size_t index, std::size_t n) const;

  // Time-dilated copy: every duration multiplied by `factor`, every rate
  // divided by it. Ratios of durations and throughputs are preserved.
  NetProfile dilated(double factor) const;

  // Flat key=value text: rtt_ms, bw_bytes_per_s, congested_fraction,
  // congestion_factor, jitter_ms, seed. '#' starts a comment.
  static NetProfile parse(std::string_view text, std::string name = "custom");
  std::string to_text() const;

  // Built-in presets: identity, low, med, high, high-clear.
  static NetProfile preset(std::string_view name);
  static const std::vector<std::string>& preset_names();

  // A preset name or a path to a profile file.
  static NetProfile resolve(const std::string& name_or_path);
};

// Size of the token bucket used by every shaped link.
inline constexpr double kTokenBucketBurstBytes = 64.0 * 1024.0;

}  // namespace ooload::netsim
