#include "ooload/core/records.hpp"

#include <cstring>

#include "ooload/core/error.hpp"

namespace ooload {

const char* to_string(LabelKind kind) noexcept {
  switch (kind) {
    case LabelKind::IntClass:
      return "int";
    case LabelKind::Blob:
      return "blob";
  }
  return "?";
}

Blob Label::encode() const {
  if (is_int()) {
    const auto v = static_cast<std::uint32_t>(int_value());
    return Blob{static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  }
  return blob_value();
}

Label Label::decode(LabelKind kind, std::span<const std::uint8_t> bytes) {
  switch (kind) {
    case LabelKind::IntClass: {
      if (bytes.size() != 4) throw DecodeError("int label must be 4 bytes");
      const std::uint32_t v = std::uint32_t{bytes[0]} | std::uint32_t{bytes[1]} << 8 |
                              std::uint32_t{bytes[2]} << 16 | std::uint32_t{bytes[3]} << 24;
      return Label::int_class(static_cast<std::int32_t>(v));
    }
    case LabelKind::Blob:
      return Label::blob(Blob(bytes.begin(), bytes.end()));
  }
  throw DecodeError("unknown label kind " + std::to_string(static_cast<int>(kind)));
}

void SampleRecord::validate() const {
  if (data.empty()) throw InvalidInput("sample " + id.str() + " has an empty data blob");
  if (label.is_int() && label.int_value() < 0) {
    throw InvalidInput("sample " + id.str() + " has negative class index");
  }
}

namespace {

constexpr std::uint64_t kMulA = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kMulB = 0xC2B2AE3D27D4EB4FULL;

inline std::uint64_t mix(std::uint64_t acc, std::uint64_t word) noexcept {
  acc ^= word * kMulB;
  acc = (acc << 31) | (acc >> 33);
  return acc * kMulA;
}

}  // namespace

std::uint64_t content_hash(std::span<const std::uint8_t> bytes, std::uint64_t seed) noexcept {
  // Four independent lanes so the loop is not latency-bound.
  std::uint64_t lanes[4] = {seed ^ 0x243F6A8885A308D3ULL, seed ^ 0x13198A2E03707344ULL,
                            seed ^ 0xA4093822299F31D0ULL, seed ^ 0x082EFA98EC4E6C89ULL};
  const std::uint8_t* p = bytes.data();
  std::size_t n = bytes.size();
  while (n >= 32) {
    for (auto& lane : lanes) {
      std::uint64_t w;
      std::memcpy(&w, p, 8);
      lane = mix(lane, w);
      p += 8;
    }
    n -= 32;
  }
  std::uint64_t acc = lanes[0] ^ (lanes[1] << 1) ^ (lanes[2] << 2) ^ (lanes[3] << 3);
  while (n >= 8) {
    std::uint64_t w;
    std::memcpy(&w, p, 8);
    acc = mix(acc, w);
    p += 8;
    n -= 8;
  }
  std::uint64_t tail = 0;
  std::memcpy(&tail, p, n);
  acc = mix(acc, tail ^ (static_cast<std::uint64_t>(bytes.size()) << 56));
  return splitmix64(acc);
}

std::uint64_t item_checksum(const SampleId& id, const Label& label,
                            std::span<const std::uint8_t> data) noexcept {
  std::uint64_t h = content_hash(id.bytes());
  const Blob encoded = label.encode();
  h = content_hash(encoded, h ^ static_cast<std::uint64_t>(label.kind()));
  return content_hash(data, h);
}

}  // namespace ooload
