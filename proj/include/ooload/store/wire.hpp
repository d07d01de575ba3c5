#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ooload/core/error.hpp"
#include "ooload/core/records.hpp"

namespace ooload::wire {

// Frame layout, all integers little-endian:
//   "OOL1" | total_len u32 | request_id u64 | code u8 | table_len u16 | table |
//   payload_len u32 | payload
// total_len counts the bytes after itself.

enum class Opcode : std::uint8_t { Get = 1, Put = 2, PutAtomic = 3, ListIds = 4, GetMeta = 5, Ping = 6 };
enum class Status : std::uint8_t { Ok = 0, NotFound = 1, BadRequest = 2, ServerError = 3 };

const char* to_string(Opcode op) noexcept;
const char* to_string(Status st) noexcept;
bool valid_opcode(std::uint8_t v) noexcept;
bool valid_status(std::uint8_t v) noexcept;

inline constexpr std::array<std::uint8_t, 4> kMagic = {'O', 'O', 'L', '1'};
inline constexpr std::size_t kPrefixBytes = 8;                  // magic + total_len
inline constexpr std::size_t kFixedBodyBytes = 8 + 1 + 2 + 4;   // id, code, table_len, payload_len
inline constexpr std::size_t kDefaultMaxFrameBytes = 64u << 20;

struct WireRequest {
  std::uint64_t request_id = 0;
  Opcode opcode = Opcode::Ping;
  std::string table;
  Blob payload;
  friend bool operator==(const WireRequest&, const WireRequest&) = default;
};

struct WireResponse {
  std::uint64_t request_id = 0;
  Status status = Status::Ok;
  std::string table;
  Blob payload;
  friend bool operator==(const WireResponse&, const WireResponse&) = default;
};

// Decoded header plus a view of the payload inside the frame bytes.
struct FrameView {
  std::uint64_t request_id = 0;
  std::uint8_t code = 0;
  std::string_view table;
  std::span<const std::uint8_t> payload;
};

std::size_t frame_size(std::size_t table_len, std::size_t payload_len) noexcept;

Blob encode(const WireRequest& req);
Blob encode(const WireResponse& resp);

// Appends everything up to and including payload_len; the caller appends (or
// writes out separately) exactly payload_len payload bytes.
void append_frame_head(Blob& out, std::uint64_t request_id, std::uint8_t code,
                       std::string_view table, std::size_t payload_len);

// Parses one complete frame. Throws DecodeError on bad magic, truncation, or a
// length field that disagrees with the bytes present.
FrameView parse_frame(std::span<const std::uint8_t> frame,
                      std::size_t max_frame = kDefaultMaxFrameBytes);

WireRequest decode_request(std::span<const std::uint8_t> frame,
                           std::size_t max_frame = kDefaultMaxFrameBytes);
WireResponse decode_response(std::span<const std::uint8_t> frame,
                             std::size_t max_frame = kDefaultMaxFrameBytes);

// Total size of the frame starting at `bytes` once its 8-byte prefix is
// available, std::nullopt before that. Throws DecodeError on bad magic and
// FrameTooLarge when total_len exceeds the limit.
std::optional<std::size_t> peek_frame_size(std::span<const std::uint8_t> bytes,
                                           std::size_t max_frame = kDefaultMaxFrameBytes);

class FrameTooLarge : public DecodeError {
 public:
  using DecodeError::DecodeError;
  const char* kind() const noexcept override { return "FrameTooLarge"; }
};

// Incremental reassembly of frames from a byte stream. Bytes can be written
// straight into the internal buffer (prepare/commit) to avoid a copy.
class FrameReader {
 public:
  explicit FrameReader(std::size_t max_frame = kDefaultMaxFrameBytes) : max_frame_(max_frame) {}

  std::span<std::uint8_t> prepare(std::size_t min_bytes);
  void commit(std::size_t n) noexcept { end_ += n; }
  void append(std::span<const std::uint8_t> bytes);

  // Next complete frame, valid until the next call to prepare/append/next.
  std::optional<std::span<const std::uint8_t>> next();

  std::size_t buffered() const noexcept { return end_ - begin_; }

 private:
  std::size_t max_frame_;
  std::vector<std::uint8_t> buf_;
  std::size_t begin_ = 0;
  std::size_t end_ = 0;
};

// ---- opcode payloads ----

// GET request: the 16-byte id.
Blob encode_id(const SampleId& id);
SampleId decode_id(std::span<const std::uint8_t> payload);

// GET response: label_kind u8 | label_len u32 | label | data_len u32 | data.
struct GetView {
  LabelKind label_kind = LabelKind::IntClass;
  std::span<const std::uint8_t> label;
  std::span<const std::uint8_t> data;
};
std::size_t get_payload_size(const Label& label, std::size_t data_len);
// Appends the GET body minus the data bytes (which end the payload).
void append_get_head(Blob& out, const Label& label, std::size_t data_len);
Blob encode_get_payload(const Label& label, std::span<const std::uint8_t> data);
GetView parse_get_payload(std::span<const std::uint8_t> payload);

// PUT: id | label_kind | label_len | label | data_len | data.
Blob encode_record(const SampleRecord& rec);
SampleRecord decode_record(std::span<const std::uint8_t> payload);

// GET_META response / metadata part of PUT_ATOMIC.
Blob encode_metadata(const MetadataRecord& meta);
MetadataRecord decode_metadata(std::span<const std::uint8_t> payload);

// PUT_ATOMIC: meta_table_len u16 | meta_table | rec_len u32 | record | metadata.
struct AtomicPut {
  std::string metadata_table;
  SampleRecord record;
  MetadataRecord metadata;
};
Blob encode_atomic_put(const AtomicPut& put);
AtomicPut decode_atomic_put(std::span<const std::uint8_t> payload);

// LIST_IDS response: count u32 | count x 16-byte ids.
Blob encode_id_list(std::span<const SampleId> ids);
std::vector<SampleId> decode_id_list(std::span<const std::uint8_t> payload);

// Text carried by BAD_REQUEST / SERVER_ERROR responses. A leading
// "<Kind>: " names the error class for the client to rethrow.
Blob encode_error(std::string_view kind, std::string_view message);
std::pair<std::string, std::string> decode_error(std::span<const std::uint8_t> payload);

}  // namespace ooload::wire
