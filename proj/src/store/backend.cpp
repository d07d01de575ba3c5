#include "ooload/store/backend.hpp"

#include <cstring>
#include <fstream>
#include <mutex>

#include "ooload/core/error.hpp"
#include "ooload/store/wire.hpp"

namespace ooload {

MemoryBackend::Table* MemoryBackend::find(std::string_view name) const {
  std::shared_lock lock(tables_mu_);
  auto it = tables_.find(std::string(name));
  return it == tables_.end() ? nullptr : it->second.get();
}

MemoryBackend::Table& MemoryBackend::find_or_create(std::string_view name, Table::Kind kind) {
  if (name.empty()) throw InvalidInput("table name must not be empty");
  Table* t = find(name);
  if (t == nullptr) {
    std::unique_lock lock(tables_mu_);
    auto& slot = tables_[std::string(name)];
    if (!slot) {
      slot = std::make_unique<Table>();
      slot->kind = kind;
    }
    t = slot.get();
  }
  if (t->kind != kind) {
    throw InvalidInput("table '" + std::string(name) + "' holds " +
                       (t->kind == Table::Kind::Data ? "data" : "metadata") + " rows");
  }
  return *t;
}

void MemoryBackend::check_label(Table& t, const SampleRecord& rec, std::string_view name) {
  if (t.label_kind && *t.label_kind != rec.label.kind()) {
    throw InvalidInput("table '" + std::string(name) + "' holds " + to_string(*t.label_kind) +
                       " labels, got " + to_string(rec.label.kind()));
  }
}

std::optional<StoredSample> MemoryBackend::get(std::string_view table, const SampleId& id) const {
  const Table* t = find(table);
  if (t == nullptr || t->kind != Table::Kind::Data) return std::nullopt;
  std::shared_lock lock(t->mu);
  auto it = t->samples.find(id);
  if (it == t->samples.end()) return std::nullopt;
  return it->second;
}

void MemoryBackend::put(std::string_view table, SampleRecord rec) {
  rec.validate();
  Table& t = find_or_create(table, Table::Kind::Data);
  std::unique_lock lock(t.mu);
  check_label(t, rec, table);
  if (t.samples.count(rec.id) != 0) throw DuplicateKey("id " + rec.id.str() + " already stored");
  t.label_kind = rec.label.kind();
  t.bytes += rec.data.size();
  auto data = std::make_shared<const Blob>(std::move(rec.data));
  t.samples.emplace(rec.id, StoredSample{std::move(rec.label), std::move(data)});
}

void MemoryBackend::put_atomic(std::string_view data_table, std::string_view meta_table,
                               SampleRecord rec, MetadataRecord meta) {
  if (rec.id != meta.id) {
    throw InvalidInput("record id " + rec.id.str() + " differs from metadata id " + meta.id.str());
  }
  if (data_table == meta_table) throw InvalidInput("data and metadata tables must differ");
  rec.validate();
  if (rec.label.is_int() && rec.label.int_value() != meta.class_label) {
    throw InvalidInput("metadata class_label disagrees with the record label for " + rec.id.str());
  }
  Table& d = find_or_create(data_table, Table::Kind::Data);
  Table& m = find_or_create(meta_table, Table::Kind::Metadata);
  std::scoped_lock lock(d.mu, m.mu);
  check_label(d, rec, data_table);
  if (d.samples.count(rec.id) != 0 || m.metadata.count(meta.id) != 0) {
    throw DuplicateKey("id " + rec.id.str() + " already stored");
  }
  d.label_kind = rec.label.kind();
  d.bytes += rec.data.size();
  auto data = std::make_shared<const Blob>(std::move(rec.data));
  d.samples.emplace(rec.id, StoredSample{std::move(rec.label), std::move(data)});
  m.metadata.emplace(meta.id, std::move(meta));
}

std::vector<SampleId> MemoryBackend::list_ids(std::string_view table) const {
  const Table* t = find(table);
  if (t == nullptr) throw NotFound("unknown table '" + std::string(table) + "'");
  std::shared_lock lock(t->mu);
  std::vector<SampleId> ids;
  if (t->kind == Table::Kind::Data) {
    ids.reserve(t->samples.size());
    for (const auto& [id, s] : t->samples) ids.push_back(id);
  } else {
    ids.reserve(t->metadata.size());
    for (const auto& [id, m] : t->metadata) ids.push_back(id);
  }
  return ids;
}

std::optional<MetadataRecord> MemoryBackend::get_metadata(std::string_view table,
                                                          const SampleId& id) const {
  const Table* t = find(table);
  if (t == nullptr || t->kind != Table::Kind::Metadata) return std::nullopt;
  std::shared_lock lock(t->mu);
  auto it = t->metadata.find(id);
  if (it == t->metadata.end()) return std::nullopt;
  return it->second;
}

std::size_t MemoryBackend::table_size(std::string_view table) const {
  const Table* t = find(table);
  if (t == nullptr) return 0;
  std::shared_lock lock(t->mu);
  return t->kind == Table::Kind::Data ? t->samples.size() : t->metadata.size();
}

std::uint64_t MemoryBackend::data_bytes(std::string_view table) const {
  const Table* t = find(table);
  if (t == nullptr) return 0;
  std::shared_lock lock(t->mu);
  return t->bytes;
}

std::vector<std::string> MemoryBackend::table_names() const {
  std::shared_lock lock(tables_mu_);
  std::vector<std::string> names;
  for (const auto& [name, t] : tables_) names.push_back(name);
  return names;
}

namespace {

constexpr char kSnapshotMagic[8] = {'O', 'O', 'L', 'S', 'N', 'A', 'P', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint8_t b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DecodeError("truncated snapshot");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | b[i];
  return v;
}

void write_chunk(std::ostream& out, const Blob& bytes) {
  write_u64(out, bytes.size());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Blob read_chunk(std::istream& in) {
  const auto n = read_u64(in);
  if (n > (std::uint64_t{1} << 34)) throw DecodeError("implausible snapshot chunk size");
  Blob b(n);
  if (!in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(n))) {
    throw DecodeError("truncated snapshot");
  }
  return b;
}

}  // namespace

void MemoryBackend::save_snapshot(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StateError("cannot write snapshot " + tmp);
    out.write(kSnapshotMagic, sizeof kSnapshotMagic);
    std::shared_lock lock(tables_mu_);
    write_u64(out, tables_.size());
    for (const auto& [name, t] : tables_) {
      std::shared_lock tl(t->mu);
      write_chunk(out, Blob(name.begin(), name.end()));
      write_u64(out, t->kind == Table::Kind::Data ? 0 : 1);
      if (t->kind == Table::Kind::Data) {
        write_u64(out, t->samples.size());
        for (const auto& [id, s] : t->samples) {
          write_chunk(out, wire::encode_record(SampleRecord{id, s.label, *s.data}));
        }
      } else {
        write_u64(out, t->metadata.size());
        for (const auto& [id, m] : t->metadata) write_chunk(out, wire::encode_metadata(m));
      }
    }
    if (!out) throw StateError("failed writing snapshot " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw StateError("cannot rename snapshot to " + path);
}

void MemoryBackend::load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StateError("cannot read snapshot " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kSnapshotMagic, 8) != 0) {
    throw DecodeError("not a snapshot file: " + path);
  }
  std::unordered_map<std::string, std::unique_ptr<Table>> loaded;
  const auto ntables = read_u64(in);
  for (std::uint64_t i = 0; i < ntables; ++i) {
    const Blob name_bytes = read_chunk(in);
    std::string name(name_bytes.begin(), name_bytes.end());
    auto t = std::make_unique<Table>();
    t->kind = read_u64(in) == 0 ? Table::Kind::Data : Table::Kind::Metadata;
    const auto count = read_u64(in);
    for (std::uint64_t k = 0; k < count; ++k) {
      const Blob chunk = read_chunk(in);
      if (t->kind == Table::Kind::Data) {
        auto rec = wire::decode_record(chunk);
        t->label_kind = rec.label.kind();
        t->bytes += rec.data.size();
        auto data = std::make_shared<const Blob>(std::move(rec.data));
        t->samples.emplace(rec.id, StoredSample{std::move(rec.label), std::move(data)});
      } else {
        auto m = wire::decode_metadata(chunk);
        t->metadata.emplace(m.id, std::move(m));
      }
    }
    loaded.emplace(std::move(name), std::move(t));
  }
  std::unique_lock lock(tables_mu_);
  tables_ = std::move(loaded);
}

}  // namespace ooload
