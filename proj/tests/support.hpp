#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ooload/bench/synthetic.hpp"
#include "ooload/client/client.hpp"
#include "ooload/store/backend.hpp"
#include "ooload/store/server.hpp"

namespace ooload::test {

inline constexpr const char* kTable = "samples";
inline constexpr const char* kMetaTable = "samples_meta";

// In-process server over a memory backend preloaded with a synthetic dataset.
struct StoreFixture {
  std::shared_ptr<MemoryBackend> backend = std::make_shared<MemoryBackend>();
  std::unique_ptr<Server> server;
  std::unique_ptr<SyntheticDataset> dataset;

  explicit StoreFixture(SyntheticDatasetSpec spec, ServerConfig cfg = {}) {
    dataset = std::make_unique<SyntheticDataset>(spec);
    for (std::size_t i = 0; i < dataset->size(); ++i) {
      backend->put_atomic(kTable, kMetaTable, dataset->record(i), dataset->metadata(i));
    }
    server = std::make_unique<Server>(backend, std::move(cfg));
  }

  std::shared_ptr<StoreClient> connect(std::size_t io_workers = 2, std::size_t per_worker = 2) const {
    ClientConfig cc;
    cc.endpoints = {server->endpoint()};
    cc.io_workers = io_workers;
    cc.connections_per_worker = per_worker;
    cc.copy_threads = 1;
    return StoreClient::connect(cc);
  }
};

inline SyntheticDatasetSpec small_spec(std::size_t n, double mean = 2000.0, std::uint64_t seed = 7) {
  SyntheticDatasetSpec s;
  s.num_samples = n;
  s.mean_size = mean;
  s.num_entities = std::max<std::size_t>(1, n / 20);
  s.seed = seed;
  return s;
}

}  // namespace ooload::test
