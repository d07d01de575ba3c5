#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ooload/core/sample_id.hpp"

namespace ooload {

using Blob = std::vector<std::uint8_t>;

enum class LabelKind : std::uint8_t { IntClass = 1, Blob = 2 };

const char* to_string(LabelKind kind) noexcept;

struct IntClass {
  std::int32_t value = 0;
  friend bool operator==(const IntClass&, const IntClass&) = default;
};

struct BlobLabel {
  Blob bytes;
  friend bool operator==(const BlobLabel&, const BlobLabel&) = default;
};

// Annotation stored next to the features: an integer class index or an
// opaque blob (serialized mask, tensor, ...).
class Label {
 public:
  Label() : value_(IntClass{}) {}
  Label(IntClass c) : value_(c) {}
  Label(BlobLabel b) : value_(std::move(b)) {}

  static Label int_class(std::int32_t v) { return Label(IntClass{v}); }
  static Label blob(Blob bytes) { return Label(BlobLabel{std::move(bytes)}); }

  LabelKind kind() const noexcept {
    return std::holds_alternative<IntClass>(value_) ? LabelKind::IntClass : LabelKind::Blob;
  }
  bool is_int() const noexcept { return kind() == LabelKind::IntClass; }
  std::int32_t int_value() const { return std::get<IntClass>(value_).value; }
  const Blob& blob_value() const { return std::get<BlobLabel>(value_).bytes; }

  // Encoded label bytes as they travel on the wire (i32 LE for IntClass).
  Blob encode() const;
  static Label decode(LabelKind kind, std::span<const std::uint8_t> bytes);

  friend bool operator==(const Label&, const Label&) = default;

 private:
  std::variant<IntClass, BlobLabel> value_;
};

struct SampleRecord {
  SampleId id;
  Label label;
  Blob data;

  // Throws InvalidInput when the record breaks a data-table invariant.
  void validate() const;
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct MetadataRecord {
  SampleId id;
  std::string entity_id;
  std::string group_key;
  std::int32_t coord_x = 0;
  std::int32_t coord_y = 0;
  std::int32_t class_label = 0;

  friend bool operator==(const MetadataRecord&, const MetadataRecord&) = default;
};

// Fast 64-bit content hash used for end-to-end integrity checks. Folding a
// per-item value with wrapping addition keeps epoch totals independent of
// delivery order.
std::uint64_t content_hash(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0) noexcept;
std::uint64_t item_checksum(const SampleId& id, const Label& label,
                            std::span<const std::uint8_t> data) noexcept;

}  // namespace ooload
