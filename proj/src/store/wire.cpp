#include "ooload/store/wire.hpp"

#include <algorithm>
#include <cstring>

#include "ooload/core/error.hpp"

namespace ooload::wire {

namespace {

void put_u16(Blob& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Blob& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Blob& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(Blob& out, std::span<const std::uint8_t> bytes) {
  out.insert(out.end(), bytes.begin(), bytes.end());
}

void put_str16(Blob& out, std::string_view s) {
  if (s.size() > 0xFFFF) throw InvalidInput("string field longer than 65535 bytes");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

std::uint32_t checked_u32(std::size_t n, const char* what) {
  if (n > 0xFFFFFFFFu) throw InvalidInput(std::string(what) + " longer than 4 GiB");
  return static_cast<std::uint32_t>(n);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : b_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw DecodeError(std::string("truncated ") + what);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::uint16_t u16(const char* what) {
    auto s = take(2, what);
    return static_cast<std::uint16_t>(s[0] | s[1] << 8);
  }
  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | s[static_cast<std::size_t>(i)];
    return v;
  }
  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | s[static_cast<std::size_t>(i)];
    return v;
  }
  std::string str16(const char* what) {
    const auto n = u16(what);
    auto s = take(n, what);
    return std::string(s.begin(), s.end());
  }
  std::size_t remaining() const noexcept { return b_.size() - pos_; }
  void expect_end(const char* what) const {
    if (remaining() != 0) throw DecodeError(std::string("trailing bytes after ") + what);
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

LabelKind label_kind_from(std::uint8_t v) {
  if (v != static_cast<std::uint8_t>(LabelKind::IntClass) &&
      v != static_cast<std::uint8_t>(LabelKind::Blob)) {
    throw DecodeError("unknown label kind " + std::to_string(v));
  }
  return static_cast<LabelKind>(v);
}

}  // namespace

const char* to_string(Opcode op) noexcept {
  switch (op) {
    case Opcode::Get: return "GET";
    case Opcode::Put: return "PUT";
    case Opcode::PutAtomic: return "PUT_ATOMIC";
    case Opcode::ListIds: return "LIST_IDS";
    case Opcode::GetMeta: return "GET_META";
    case Opcode::Ping: return "PING";
  }
  return "?";
}

const char* to_string(Status st) noexcept {
  switch (st) {
    case Status::Ok: return "OK";
    case Status::NotFound: return "NOT_FOUND";
    case Status::BadRequest: return "BAD_REQUEST";
    case Status::ServerError: return "SERVER_ERROR";
  }
  return "?";
}

bool valid_opcode(std::uint8_t v) noexcept { return v >= 1 && v <= 6; }
bool valid_status(std::uint8_t v) noexcept { return v <= 3; }

std::size_t frame_size(std::size_t table_len, std::size_t payload_len) noexcept {
  return kPrefixBytes + kFixedBodyBytes + table_len + payload_len;
}

void append_frame_head(Blob& out, std::uint64_t request_id, std::uint8_t code,
                       std::string_view table, std::size_t payload_len) {
  if (table.size() > 0xFFFF) throw InvalidInput("table name longer than 65535 bytes");
  const std::size_t total = kFixedBodyBytes + table.size() + payload_len;
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, checked_u32(total, "frame"));
  put_u64(out, request_id);
  out.push_back(code);
  put_u16(out, static_cast<std::uint16_t>(table.size()));
  out.insert(out.end(), table.begin(), table.end());
  put_u32(out, checked_u32(payload_len, "payload"));
}

Blob encode(const WireRequest& req) {
  Blob out;
  out.reserve(frame_size(req.table.size(), req.payload.size()));
  append_frame_head(out, req.request_id, static_cast<std::uint8_t>(req.opcode), req.table,
                    req.payload.size());
  put_bytes(out, req.payload);
  return out;
}

Blob encode(const WireResponse& resp) {
  Blob out;
  out.reserve(frame_size(resp.table.size(), resp.payload.size()));
  append_frame_head(out, resp.request_id, static_cast<std::uint8_t>(resp.status), resp.table,
                    resp.payload.size());
  put_bytes(out, resp.payload);
  return out;
}

std::optional<std::size_t> peek_frame_size(std::span<const std::uint8_t> bytes,
                                           std::size_t max_frame) {
  const std::size_t have = std::min(bytes.size(), kMagic.size());
  if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(have), kMagic.begin())) {
    throw DecodeError("bad frame magic");
  }
  if (bytes.size() < kPrefixBytes) return std::nullopt;
  const std::uint32_t total = std::uint32_t{bytes[4]} | std::uint32_t{bytes[5]} << 8 |
                              std::uint32_t{bytes[6]} << 16 | std::uint32_t{bytes[7]} << 24;
  if (total > max_frame) {
    throw FrameTooLarge("frame of " + std::to_string(total) + " bytes exceeds limit of " +
                        std::to_string(max_frame));
  }
  if (total < kFixedBodyBytes) throw DecodeError("frame length below fixed header size");
  return kPrefixBytes + std::size_t{total};
}

FrameView parse_frame(std::span<const std::uint8_t> frame, std::size_t max_frame) {
  if (frame.size() < kPrefixBytes) throw DecodeError("truncated frame prefix");
  const auto size = peek_frame_size(frame, max_frame);
  if (*size != frame.size()) throw DecodeError("frame length mismatch");
  Reader r(frame.subspan(kPrefixBytes));
  FrameView v;
  v.request_id = r.u64("request id");
  v.code = r.u8("code");
  const auto table_len = r.u16("table length");
  auto table = r.take(table_len, "table");
  v.table = std::string_view(reinterpret_cast<const char*>(table.data()), table.size());
  const auto payload_len = r.u32("payload length");
  if (payload_len != r.remaining()) throw DecodeError("payload length mismatch");
  v.payload = r.take(payload_len, "payload");
  return v;
}

WireRequest decode_request(std::span<const std::uint8_t> frame, std::size_t max_frame) {
  const auto v = parse_frame(frame, max_frame);
  if (!valid_opcode(v.code)) throw DecodeError("unknown opcode " + std::to_string(v.code));
  return WireRequest{v.request_id, static_cast<Opcode>(v.code), std::string(v.table),
                     Blob(v.payload.begin(), v.payload.end())};
}

WireResponse decode_response(std::span<const std::uint8_t> frame, std::size_t max_frame) {
  const auto v = parse_frame(frame, max_frame);
  if (!valid_status(v.code)) throw DecodeError("unknown status " + std::to_string(v.code));
  return WireResponse{v.request_id, static_cast<Status>(v.code), std::string(v.table),
                      Blob(v.payload.begin(), v.payload.end())};
}

std::span<std::uint8_t> FrameReader::prepare(std::size_t min_bytes) {
  if (begin_ == end_) begin_ = end_ = 0;
  if (buf_.size() - end_ < min_bytes) {
    if (begin_ > 0) {
      std::memmove(buf_.data(), buf_.data() + begin_, end_ - begin_);
      end_ -= begin_;
      begin_ = 0;
    }
    if (buf_.size() - end_ < min_bytes) buf_.resize(std::max(buf_.size() * 2, end_ + min_bytes));
  }
  return std::span<std::uint8_t>(buf_.data() + end_, buf_.size() - end_);
}

void FrameReader::append(std::span<const std::uint8_t> bytes) {
  auto dst = prepare(bytes.size());
  std::memcpy(dst.data(), bytes.data(), bytes.size());
  commit(bytes.size());
}

std::optional<std::span<const std::uint8_t>> FrameReader::next() {
  std::span<const std::uint8_t> avail(buf_.data() + begin_, end_ - begin_);
  if (avail.empty()) return std::nullopt;
  const auto size = peek_frame_size(avail, max_frame_);
  if (!size || avail.size() < *size) return std::nullopt;
  begin_ += *size;
  return avail.first(*size);
}

Blob encode_id(const SampleId& id) { return Blob(id.bytes().begin(), id.bytes().end()); }

SampleId decode_id(std::span<const std::uint8_t> payload) {
  if (payload.size() != SampleId::kSize) throw DecodeError("id payload must be 16 bytes");
  return SampleId::from_bytes(payload);
}

std::size_t get_payload_size(const Label& label, std::size_t data_len) {
  const std::size_t label_len = label.is_int() ? 4 : label.blob_value().size();
  return 1 + 4 + label_len + 4 + data_len;
}

void append_get_head(Blob& out, const Label& label, std::size_t data_len) {
  out.push_back(static_cast<std::uint8_t>(label.kind()));
  const Blob enc = label.encode();
  put_u32(out, checked_u32(enc.size(), "label"));
  put_bytes(out, enc);
  put_u32(out, checked_u32(data_len, "data"));
}

Blob encode_get_payload(const Label& label, std::span<const std::uint8_t> data) {
  Blob out;
  out.reserve(get_payload_size(label, data.size()));
  append_get_head(out, label, data.size());
  put_bytes(out, data);
  return out;
}

GetView parse_get_payload(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  GetView v;
  v.label_kind = label_kind_from(r.u8("label kind"));
  v.label = r.take(r.u32("label length"), "label");
  if (v.label_kind == LabelKind::IntClass && v.label.size() != 4) {
    throw DecodeError("int label must be 4 bytes");
  }
  v.data = r.take(r.u32("data length"), "data");
  r.expect_end("GET body");
  return v;
}

Blob encode_record(const SampleRecord& rec) {
  Blob out;
  out.reserve(SampleId::kSize + get_payload_size(rec.label, rec.data.size()));
  put_bytes(out, rec.id.bytes());
  append_get_head(out, rec.label, rec.data.size());
  put_bytes(out, rec.data);
  return out;
}

SampleRecord decode_record(std::span<const std::uint8_t> payload) {
  if (payload.size() < SampleId::kSize) throw DecodeError("truncated record id");
  SampleRecord rec;
  rec.id = SampleId::from_bytes(payload.first(SampleId::kSize));
  const auto v = parse_get_payload(payload.subspan(SampleId::kSize));
  rec.label = Label::decode(v.label_kind, v.label);
  rec.data.assign(v.data.begin(), v.data.end());
  return rec;
}

Blob encode_metadata(const MetadataRecord& meta) {
  Blob out;
  put_bytes(out, meta.id.bytes());
  put_str16(out, meta.entity_id);
  put_str16(out, meta.group_key);
  put_u32(out, static_cast<std::uint32_t>(meta.coord_x));
  put_u32(out, static_cast<std::uint32_t>(meta.coord_y));
  put_u32(out, static_cast<std::uint32_t>(meta.class_label));
  return out;
}

MetadataRecord decode_metadata(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  MetadataRecord m;
  m.id = SampleId::from_bytes(r.take(SampleId::kSize, "metadata id"));
  m.entity_id = r.str16("entity id");
  m.group_key = r.str16("group key");
  m.coord_x = static_cast<std::int32_t>(r.u32("coord x"));
  m.coord_y = static_cast<std::int32_t>(r.u32("coord y"));
  m.class_label = static_cast<std::int32_t>(r.u32("class label"));
  r.expect_end("metadata record");
  return m;
}

Blob encode_atomic_put(const AtomicPut& put) {
  Blob out;
  put_str16(out, put.metadata_table);
  const Blob rec = encode_record(put.record);
  put_u32(out, checked_u32(rec.size(), "record"));
  put_bytes(out, rec);
  put_bytes(out, encode_metadata(put.metadata));
  return out;
}

AtomicPut decode_atomic_put(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  AtomicPut p;
  p.metadata_table = r.str16("metadata table");
  p.record = decode_record(r.take(r.u32("record length"), "record"));
  p.metadata = decode_metadata(r.take(r.remaining(), "metadata"));
  return p;
}

Blob encode_id_list(std::span<const SampleId> ids) {
  Blob out;
  out.reserve(4 + ids.size() * SampleId::kSize);
  put_u32(out, checked_u32(ids.size(), "id list"));
  for (const auto& id : ids) put_bytes(out, id.bytes());
  return out;
}

std::vector<SampleId> decode_id_list(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  const auto n = r.u32("id count");
  if (r.remaining() != std::size_t{n} * SampleId::kSize) throw DecodeError("id list length mismatch");
  std::vector<SampleId> ids;
  ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) ids.push_back(SampleId::from_bytes(r.take(SampleId::kSize, "id")));
  return ids;
}

Blob encode_error(std::string_view kind, std::string_view message) {
  Blob out(kind.begin(), kind.end());
  out.push_back(':');
  out.push_back(' ');
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

std::pair<std::string, std::string> decode_error(std::span<const std::uint8_t> payload) {
  std::string text(payload.begin(), payload.end());
  const auto sep = text.find(": ");
  if (sep == std::string::npos) return {"", text};
  return {text.substr(0, sep), text.substr(sep + 2)};
}

}  // namespace ooload::wire
