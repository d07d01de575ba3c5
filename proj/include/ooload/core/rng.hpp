#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace ooload {

// SplitMix64 finalizer. Used for seeding and for seeded hashing of small
// integers (e.g. picking the congested connection subset).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic xoshiro256** generator keyed by (seed, stream). The integer
// sequence is fully specified here, so it is identical on every platform.
// Floating-point helpers (normal, lognormal) go through libm and are only
// reproducible to the last ulp.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;

  // Unbiased integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept;

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform01() noexcept;

  double normal() noexcept;
  double lognormal(double mu, double sigma) noexcept { return std::exp(mu + sigma * normal()); }

  void fill(std::span<std::uint8_t> out) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u64(); }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ooload
