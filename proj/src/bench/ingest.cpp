#include "ooload/bench/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "ooload/core/error.hpp"

namespace ooload {

namespace {

constexpr const char* kSidecar = "metadata.csv";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::int32_t parse_i32(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size() || v < INT32_MIN || v > INT32_MAX) throw std::invalid_argument(s);
  return static_cast<std::int32_t>(v);
}

// Runs fn(i) for every i on `threads` threads, stopping early on the first
// exception and rethrowing it.
void parallel_each(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lk(mu);
        if (!first) first = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t t = std::max<std::size_t>(1, std::min(threads, n));
  for (std::size_t k = 0; k < t; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace

std::string IngestReport::to_text() const {
  return fmt::format("count={}\nbytes={}\nduration_s={:.6f}\n", count, bytes, duration_s);
}

std::vector<SidecarRow> parse_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path);
  std::vector<SidecarRow> rows;
  std::unordered_map<std::string, std::size_t> line_of;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("filename,", 0) == 0) continue;
    const auto f = split_fields(line);
    if (f.size() != 6) {
      throw InvalidInput(fmt::format("{}:{}: expected 6 fields, got {}", path, lineno, f.size()));
    }
    SidecarRow r;
    r.filename = f[0];
    r.entity_id = f[1];
    r.group_key = f[2];
    if (r.filename.empty()) throw InvalidInput(fmt::format("{}:{}: empty filename", path, lineno));
    if (r.entity_id.empty()) throw InvalidInput(fmt::format("{}:{}: empty entity_id", path, lineno));
    try {
      r.x = parse_i32(f[3]);
      r.y = parse_i32(f[4]);
      r.class_label = parse_i32(f[5]);
    } catch (const std::exception&) {
      throw InvalidInput(fmt::format("{}:{}: x, y and class_label must be integers", path, lineno));
    }
    if (auto [it, fresh] = line_of.try_emplace(r.filename, lineno); !fresh) {
      throw DuplicateKey(fmt::format("{}:{}: file '{}' already listed on line {}", path, lineno, r.filename,
                                     it->second));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

IngestReport ingest_records(StoreClient& client, const IngestOptions& opts, std::size_t n,
                            const RecordMaker& make, const std::function<std::string(std::size_t)>& describe) {
  IngestReport rep;
  std::atomic<std::uint64_t> bytes{0};
  const auto t0 = std::chrono::steady_clock::now();
  parallel_each(n, opts.parallelism, [&](std::size_t i) {
    auto [rec, meta] = make(i);
    const auto sz = rec.data.size();
    try {
      client.put_atomic(opts.data_table, opts.meta_table, rec, meta);
    } catch (const DuplicateKey& e) {
      throw DuplicateKey(fmt::format("{} is already stored ({})", describe ? describe(i) : rec.id.str(), e.what()));
    }
    bytes += sz;
  });
  rep.count = n;
  rep.bytes = bytes.load();
  rep.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

IngestReport ingest_directory(StoreClient& client, const IngestOptions& opts, const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InvalidInput(dir + " is not a directory");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != kSidecar) files.push_back(e.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  const auto sidecar = fs::path(dir) / kSidecar;
  if (files.empty() && !fs::exists(sidecar)) return {};
  if (!fs::exists(sidecar)) throw InvalidInput(fmt::format("{} has samples but no {}", dir, kSidecar));

  const auto rows = parse_sidecar(sidecar.string());
  std::unordered_map<std::string, const SidecarRow*> by_name;
  for (const auto& r : rows) by_name.emplace(r.filename, &r);
  for (const auto& f : files) {
    if (!by_name.count(f)) throw InvalidInput(fmt::format("no {} row for file '{}'", kSidecar, f));
  }
  for (const auto& r : rows) {
    if (!fs::is_regular_file(fs::path(dir) / r.filename)) {
      throw InvalidInput(fmt::format("{} lists '{}' which is not in {}", kSidecar, r.filename, dir));
    }
  }

  SampleIdGenerator claims(0);
  std::vector<SampleId> ids;
  for (const auto& f : files) {
    ids.push_back(derive_sample_id(f, opts.id_namespace));
    if (!claims.claim(ids.back())) throw DuplicateKey(fmt::format("file '{}' maps to an id already in use", f));
  }

  return ingest_records(client, opts, files.size(), [&](std::size_t i) {
    const auto& name = files[i];
    const auto& row = *by_name.at(name);
    std::ifstream in(fs::path(dir) / name, std::ios::binary);
    if (!in) throw InvalidInput("cannot read " + name);
    Blob data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    SampleRecord rec{ids[i], Label::int_class(row.class_label), std::move(data)};
    MetadataRecord meta{ids[i], row.entity_id, row.group_key, row.x, row.y, row.class_label};
    return std::pair{std::move(rec), std::move(meta)};
  }, [&](std::size_t i) { return "file '" + files[i] + "'"; });
}

IngestReport ingest_synthetic(StoreClient& client, const IngestOptions& opts, const SyntheticDataset& ds) {
  return ingest_records(client, opts, ds.size(), [&](std::size_t i) {
    return std::pair{ds.record(i), ds.metadata(i)};
  });
}

std::vector<MetadataRecord> fetch_metadata(StoreClient& client, const std::string& meta_table,
                                           std::size_t parallelism) {
  auto ids = client.list_ids(meta_table);
  // Server order depends on insertion order; sorting keeps splits reproducible.
  std::sort(ids.begin(), ids.end());
  std::vector<MetadataRecord> out(ids.size());
  parallel_each(ids.size(), parallelism, [&](std::size_t i) {
    auto m = client.get_metadata(meta_table, ids[i]);
    if (!m) throw NotFound("metadata for " + ids[i].str() + " vanished");
    out[i] = std::move(*m);
  });
  return out;
}

}  // namespace ooload
