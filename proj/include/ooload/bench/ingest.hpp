#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ooload/bench/synthetic.hpp"
#include "ooload/client/client.hpp"
#include "ooload/core/records.hpp"

namespace ooload {

struct IngestOptions {
  std::string data_table = "samples";
  std::string meta_table = "samples_meta";
  std::size_t parallelism = 8;
  // Seeds the name-derived ids of directory sources.
  std::uint64_t id_namespace = 0;
};

struct IngestReport {
  std::size_t count = 0;
  std::uint64_t bytes = 0;
  double duration_s = 0.0;

  std::string to_text() const;  // key=value
};

// One row of metadata.csv.
struct SidecarRow {
  std::string filename;
  std::string entity_id;
  std::string group_key;
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t class_label = 0;
};

// Parses metadata.csv (header optional). Throws InvalidInput naming the line
// of the first malformed row, DuplicateKey naming a repeated filename.
std::vector<SidecarRow> parse_sidecar(const std::string& path);

// Calls make(i) for i in [0, n) on `parallelism` threads and inserts each
// pair with put_atomic. The first failure stops the remaining workers and is
// rethrown. describe(i) names item i in DuplicateKey messages.
using RecordMaker = std::function<std::pair<SampleRecord, MetadataRecord>(std::size_t)>;
IngestReport ingest_records(StoreClient& client, const IngestOptions& opts, std::size_t n,
                            const RecordMaker& make,
                            const std::function<std::string(std::size_t)>& describe = {});

// Every regular file in `dir` except metadata.csv is a sample and must have a
// sidecar row; its id is derived from the file name, its label is the row's
// class_label. A repeated file (here or already stored) raises DuplicateKey
// naming it.
IngestReport ingest_directory(StoreClient& client, const IngestOptions& opts, const std::string& dir);
IngestReport ingest_synthetic(StoreClient& client, const IngestOptions& opts, const SyntheticDataset& ds);

// Pulls ids from the metadata table and fetches every row.
std::vector<MetadataRecord> fetch_metadata(StoreClient& client, const std::string& meta_table,
                                           std::size_t parallelism = 8);

}  // namespace ooload
