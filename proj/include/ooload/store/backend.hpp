#pragma once

#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ooload/core/records.hpp"

namespace ooload {

// One data-table row as held by a backend. The blob is shared so that the
// server can stream it out without copying.
struct StoredSample {
  Label label;
  std::shared_ptr<const Blob> data;
};

// Table names are plain strings, conventionally "keyspace.table".
class StoreBackend {
 public:
  virtual ~StoreBackend() = default;

  virtual std::optional<StoredSample> get(std::string_view table, const SampleId& id) const = 0;
  // Throws DuplicateKey, InvalidInput.
  virtual void put(std::string_view table, SampleRecord rec) = 0;
  // Both rows become visible together. Throws InvalidInput on id mismatch,
  // DuplicateKey if either row exists.
  virtual void put_atomic(std::string_view data_table, std::string_view meta_table,
                          SampleRecord rec, MetadataRecord meta) = 0;
  // Throws NotFound for an unknown table.
  virtual std::vector<SampleId> list_ids(std::string_view table) const = 0;
  virtual std::optional<MetadataRecord> get_metadata(std::string_view table,
                                                     const SampleId& id) const = 0;
};

// Hash map per table, created on first write. Readers take a shared lock on
// one table; put_atomic holds the exclusive locks of both tables at once.
class MemoryBackend final : public StoreBackend {
 public:
  MemoryBackend() = default;

  std::optional<StoredSample> get(std::string_view table, const SampleId& id) const override;
  void put(std::string_view table, SampleRecord rec) override;
  void put_atomic(std::string_view data_table, std::string_view meta_table, SampleRecord rec,
                  MetadataRecord meta) override;
  std::vector<SampleId> list_ids(std::string_view table) const override;
  std::optional<MetadataRecord> get_metadata(std::string_view table,
                                             const SampleId& id) const override;

  std::size_t table_size(std::string_view table) const;
  std::uint64_t data_bytes(std::string_view table) const;
  std::vector<std::string> table_names() const;

  // Binary snapshot of every table. load() replaces the current contents.
  void save_snapshot(const std::string& path) const;
  void load_snapshot(const std::string& path);

 private:
  struct Table {
    enum class Kind { Data, Metadata } kind;
    mutable std::shared_mutex mu;
    std::optional<LabelKind> label_kind;
    std::unordered_map<SampleId, StoredSample, SampleIdHash> samples;
    std::unordered_map<SampleId, MetadataRecord, SampleIdHash> metadata;
    std::uint64_t bytes = 0;
  };

  Table* find(std::string_view name) const;
  Table& find_or_create(std::string_view name, Table::Kind kind);
  static void check_label(Table& t, const SampleRecord& rec, std::string_view name);

  mutable std::shared_mutex tables_mu_;
  std::unordered_map<std::string, std::unique_ptr<Table>> tables_;
};

}  // namespace ooload
