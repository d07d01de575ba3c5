#include "ooload/core/sample_id.hpp"

#include "ooload/core/error.hpp"

namespace ooload {

namespace {

constexpr char kHex[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_hyphen_position(std::size_t i) { return i == 8 || i == 13 || i == 18 || i == 23; }

void stamp_v4(std::array<std::uint8_t, SampleId::kSize>& b) {
  b[6] = static_cast<std::uint8_t>((b[6] & 0x0F) | 0x40);
  b[8] = static_cast<std::uint8_t>((b[8] & 0x3F) | 0x80);
}

}  // namespace

SampleId SampleId::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kSize) {
    throw InvalidInput("sample id must be 16 bytes, got " + std::to_string(bytes.size()));
  }
  std::array<std::uint8_t, kSize> out{};
  std::memcpy(out.data(), bytes.data(), kSize);
  return SampleId(out);
}

SampleId SampleId::parse(std::string_view text) {
  if (text.size() != kTextSize) {
    throw InvalidInput("malformed uuid '" + std::string(text) + "': expected 36 characters");
  }
  std::array<std::uint8_t, kSize> out{};
  std::size_t nibble = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_hyphen_position(i)) {
      if (text[i] != '-') throw InvalidInput("malformed uuid '" + std::string(text) + "'");
      continue;
    }
    const int v = hex_value(text[i]);
    if (v < 0) throw InvalidInput("malformed uuid '" + std::string(text) + "'");
    out[nibble / 2] = static_cast<std::uint8_t>(out[nibble / 2] | (nibble % 2 == 0 ? v << 4 : v));
    ++nibble;
  }
  return SampleId(out);
}

SampleId SampleId::random_v4(Rng& rng) {
  std::array<std::uint8_t, kSize> b{};
  rng.fill(b);
  stamp_v4(b);
  return SampleId(b);
}

std::string SampleId::str() const {
  std::string out;
  out.reserve(kTextSize);
  for (std::size_t i = 0; i < kSize; ++i) {
    if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
    out.push_back(kHex[bytes_[i] >> 4]);
    out.push_back(kHex[bytes_[i] & 0x0F]);
  }
  return out;
}

SampleId SampleIdGenerator::next() {
  for (;;) {
    SampleId id = SampleId::random_v4(rng_);
    if (seen_.insert(id).second) return id;
    ++collisions_;
  }
}

SampleId derive_sample_id(std::string_view name, std::uint64_t namespace_seed) {
  // FNV-1a over the name, then expand through the seeded generator.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : name) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  Rng rng(namespace_seed, h);
  return SampleId::random_v4(rng);
}

}  // namespace ooload
