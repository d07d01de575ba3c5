#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>

#include "ooload/core/rng.hpp"

namespace ooload {

// 128-bit sample key. Canonical text form is the 36-character hyphenated
// lowercase hex layout (8-4-4-4-12).
class SampleId {
 public:
  static constexpr std::size_t kSize = 16;
  static constexpr std::size_t kTextSize = 36;

  constexpr SampleId() = default;
  explicit SampleId(const std::array<std::uint8_t, kSize>& bytes) : bytes_(bytes) {}

  static SampleId from_bytes(std::span<const std::uint8_t> bytes);

  // Accepts upper or lower case hex; throws InvalidInput on anything else.
  static SampleId parse(std::string_view text);

  // Random version-4 id.
  static SampleId random_v4(Rng& rng);

  std::string str() const;
  const std::array<std::uint8_t, kSize>& bytes() const noexcept { return bytes_; }

  int version() const noexcept { return bytes_[6] >> 4; }
  bool is_nil() const noexcept {
    for (auto b : bytes_)
      if (b != 0) return false;
    return true;
  }

  friend auto operator<=>(const SampleId&, const SampleId&) = default;

 private:
  std::array<std::uint8_t, kSize> bytes_{};
};

struct SampleIdHash {
  std::size_t operator()(const SampleId& id) const noexcept {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    std::memcpy(&lo, id.bytes().data(), 8);
    std::memcpy(&hi, id.bytes().data() + 8, 8);
    return static_cast<std::size_t>(splitmix64(lo ^ splitmix64(hi)));
  }
};

// Generates v4 ids and refuses to hand out the same id twice within one
// ingestion run.
class SampleIdGenerator {
 public:
  explicit SampleIdGenerator(std::uint64_t seed, std::uint64_t stream = 0) : rng_(seed, stream) {}

  SampleId next();

  // Registers an externally derived id; returns false if it was already seen.
  bool claim(const SampleId& id) { return seen_.insert(id).second; }

  std::size_t issued() const noexcept { return seen_.size(); }
  std::size_t collisions() const noexcept { return collisions_; }

 private:
  Rng rng_;
  std::unordered_set<SampleId, SampleIdHash> seen_;
  std::size_t collisions_ = 0;
};

// Deterministic v4-formatted id derived from a name (used so that
// re-ingesting the same file maps to the same key).
SampleId derive_sample_id(std::string_view name, std::uint64_t namespace_seed);

}  // namespace ooload

template <>
struct std::hash<ooload::SampleId> : ooload::SampleIdHash {};
