#include "ooload/bench/runs.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "ooload/client/client.hpp"
#include "ooload/core/error.hpp"
#include "ooload/loader/loader_sim.hpp"
#include "ooload/loader/prefetch_loader.hpp"
#include "ooload/store/wire.hpp"

namespace ooload {

std::uint64_t get_response_bytes(std::uint64_t data_bytes) {
  return wire::frame_size(0, wire::get_payload_size(Label::int_class(0), data_bytes));
}

namespace {

bool interrupted(const RunOptions& o) {
  return o.interrupt != nullptr && o.interrupt->load(std::memory_order_relaxed);
}

std::shared_ptr<StoreClient> open_client(const RunOptions& o) {
  if (o.time_dilation <= 0.0) throw InvalidSpec("time_dilation must be positive");
  ClientConfig cc;
  cc.endpoints = o.endpoints;
  cc.io_workers = o.io_workers;
  cc.connections_per_worker = o.connections_per_worker;
  cc.max_inflight_per_connection = o.max_inflight_per_connection;
  cc.copy_threads = o.copy_threads;
  cc.request_timeout = std::chrono::milliseconds(static_cast<long>(30000 * o.time_dilation));
  if (!o.profile.is_identity()) cc.netprofile = o.profile.dilated(o.time_dilation);
  return StoreClient::connect(cc);
}

// Samples per-connection delivered bytes at a fixed interval of client time.
class Sampler {
 public:
  Sampler(std::shared_ptr<StoreClient> client, double interval_s)
      : client_(std::move(client)), interval_(interval_s) {
    last_ = client_->counters();
    thread_ = std::thread([this] { run(); });
  }
  ~Sampler() { stop(); }

  std::vector<std::vector<std::uint64_t>> stop() {
    {
      std::lock_guard lock(mu_);
      if (stopped_) return rows_;
      stopped_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
    take();
    return rows_;
  }

 private:
  void run() {
    std::unique_lock lock(mu_);
    for (std::size_t k = 1;; ++k) {
      const double due = static_cast<double>(k) * interval_;
      const auto wait = std::chrono::duration<double>(std::max(0.0, due - client_->now()));
      if (cv_.wait_for(lock, wait, [&] { return stopped_; })) return;
      lock.unlock();
      take();
      lock.lock();
    }
  }

  void take() {
    auto now = client_->counters();
    std::vector<std::uint64_t> row(now.connections.size());
    for (std::size_t c = 0; c < row.size(); ++c) {
      row[c] = now.connections[c].bytes_in - last_.connections[c].bytes_in;
    }
    rows_.push_back(std::move(row));
    last_ = std::move(now);
  }

  std::shared_ptr<StoreClient> client_;
  double interval_;
  ClientCounters last_;
  std::vector<std::vector<std::uint64_t>> rows_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopped_ = false;
  std::thread thread_;
};

BatchRecord record_of(std::size_t loader, const Batch& b) {
  BatchRecord r;
  r.loader = loader;
  r.epoch = b.epoch;
  r.seq = b.seq;
  r.items = b.size();
  r.bytes = b.bytes();
  r.request_time = b.request_time;
  r.ready_time = b.ready_time;
  r.ask_time = b.ask_time;
  r.emit_time = b.emit_time;
  return r;
}

std::vector<std::pair<std::size_t, std::size_t>> issue_pairs(const PrefetchLoader& loader) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(loader.issue_log().size());
  for (const auto& i : loader.issue_log()) out.emplace_back(i.consumed, i.issued);
  return out;
}

// Runs the epochs of one loader; `pace` is called after every batch.
template <typename Pace>
void drive_loader(const RunOptions& o, PrefetchLoader& loader, const std::vector<SampleId>& ids,
                  std::size_t index, StoreClient& client, std::vector<BatchRecord>& batches,
                  std::vector<EpochMetrics>& epochs, Pace&& pace) {
  for (std::size_t k = 0; k < o.epochs && !interrupted(o); ++k) {
    const std::uint64_t e = o.first_epoch + k;
    EpochMetrics em;
    em.loader = index;
    em.epoch = e;
    em.start = client.now();
    loader.start_epoch(ids, e);
    while (auto b = loader.next_batch()) {
      em.bytes += b->bytes();
      em.items += b->size();
      em.checksum += b->checksum();
      em.end = b->emit_time;
      batches.push_back(record_of(index, *b));
      pace(*b);
      if (interrupted(o)) {
        em.partial = loader.epoch_running();
        break;
      }
    }
    epochs.push_back(em);
    if (em.partial) break;
  }
}

}  // namespace

RunMetrics run_tightloop(const RunOptions& o, const std::vector<SampleId>& ids) {
  if (ids.empty()) throw InvalidInput("tightloop needs at least one id");
  auto client = open_client(o);
  PrefetchLoader loader(client, o.table, o.prefetch);
  RunMetrics m;
  m.kind = "tightloop";
  m.sample_interval_s = o.sample_interval_s * o.time_dilation;
  Sampler sampler(client, m.sample_interval_s);
  drive_loader(o, loader, ids, 0, *client, m.batches, m.epochs, [](const Batch&) {});
  m.conn_bytes = sampler.stop();
  m.transient_request_ratio = transient_ratio(issue_pairs(loader));
  const auto counters = client->counters();
  m.requests = counters.requests;
  m.speculative_requests = counters.speculative_requests;
  rescale_time(m, o.time_dilation);
  return m;
}

RunMetrics run_trainsim(const RunOptions& o, const TrainSimOptions& train, const std::vector<SampleId>& ids) {
  if (train.consumers == 0) throw InvalidSpec("trainsim needs at least one consumer");
  if (train.per_consumer_rate < 0.0) throw InvalidSpec("per_consumer_rate must be >= 0");
  std::vector<std::vector<SampleId>> shards(train.consumers);
  for (std::size_t i = 0; i < ids.size(); ++i) shards[i % train.consumers].push_back(ids[i]);
  for (const auto& s : shards) {
    if (s.empty()) throw InvalidInput("fewer ids than consumers");
  }
  auto client = open_client(o);
  RunMetrics m;
  m.kind = "trainsim";
  m.consumers = train.consumers;
  m.per_consumer_rate = train.per_consumer_rate / o.time_dilation;
  m.sample_interval_s = o.sample_interval_s * o.time_dilation;
  const double item_time = train.per_consumer_rate > 0 ? 1.0 / m.per_consumer_rate : 0.0;

  std::vector<std::vector<BatchRecord>> batches(train.consumers);
  std::vector<std::vector<EpochMetrics>> epochs(train.consumers);
  std::vector<double> finish(train.consumers, 0.0);
  std::vector<double> transient(train.consumers, 0.0);
  std::vector<std::exception_ptr> errors(train.consumers);
  Sampler sampler(client, m.sample_interval_s);
  std::vector<std::thread> threads;
  for (std::size_t k = 0; k < train.consumers; ++k) {
    threads.emplace_back([&, k] {
      try {
        PrefetchLoader loader(client, o.table, o.prefetch);
        drive_loader(o, loader, shards[k], k, *client, batches[k], epochs[k], [&](const Batch& b) {
          const double done = b.emit_time + item_time * static_cast<double>(b.size());
          finish[k] = done;
          const double left = done - client->now();
          if (left > 0) std::this_thread::sleep_for(std::chrono::duration<double>(left));
        });
        transient[k] = transient_ratio(issue_pairs(loader));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  m.conn_bytes = sampler.stop();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t k = 0; k < train.consumers; ++k) {
    for (auto& b : batches[k]) {
      m.items_total += b.items;
      m.stall_time += b.wait_time();
      m.batches.push_back(b);
    }
    m.epochs.insert(m.epochs.end(), epochs[k].begin(), epochs[k].end());
    m.duration = std::max(m.duration, finish[k]);
    m.transient_request_ratio = std::max(m.transient_request_ratio, transient[k]);
  }
  std::stable_sort(m.batches.begin(), m.batches.end(),
                   [](const BatchRecord& a, const BatchRecord& b) { return a.emit_time < b.emit_time; });
  const auto counters = client->counters();
  m.requests = counters.requests;
  m.speculative_requests = counters.speculative_requests;
  rescale_time(m, o.time_dilation);
  return m;
}

namespace {

sim::LoaderSimConfig sim_config(const RunOptions& o) {
  sim::LoaderSimConfig c;
  c.prefetch = o.prefetch;
  c.profile = o.profile;
  c.num_connections = o.total_connections();
  c.max_inflight = o.max_inflight_per_connection;
  c.epochs = o.epochs;
  c.first_epoch = o.first_epoch;
  c.request_bytes = wire::frame_size(o.table.size(), SampleId::kSize);
  c.sample_interval_s = o.sample_interval_s;
  return c;
}

RunMetrics from_sim(const sim::SimResult& r, const std::string& kind) {
  RunMetrics m;
  m.kind = kind;
  m.source = "oracle";
  m.sample_interval_s = r.sample_interval_s;
  m.conn_bytes = r.conn_bytes;
  m.requests = r.requests;
  m.speculative_requests = r.speculative_requests;
  for (const auto& b : r.batches) {
    m.batches.push_back({b.loader, b.epoch, b.seq, b.items, b.bytes, b.request_time, b.ready_time, b.ask_time,
                         b.emit_time});
  }
  for (const auto& e : r.epochs) {
    EpochMetrics em;
    em.loader = e.loader;
    em.epoch = e.epoch;
    em.start = e.start;
    em.end = e.end;
    em.bytes = e.bytes;
    em.items = e.items;
    m.epochs.push_back(em);
  }
  // Issue records are epoch-local in the oracle.
  std::map<std::pair<std::size_t, std::uint64_t>, std::vector<std::pair<std::size_t, std::size_t>>> pairs;
  for (const auto& i : r.issues) pairs[{i.loader, i.epoch}].emplace_back(i.consumed, i.issued);
  for (const auto& [key, v] : pairs) m.transient_request_ratio = std::max(m.transient_request_ratio, transient_ratio(v));
  return m;
}

}  // namespace

RunMetrics simulate_tightloop(const RunOptions& o, const std::vector<SampleId>& ids,
                              const std::vector<std::uint64_t>& data_bytes) {
  if (ids.size() != data_bytes.size()) throw InvalidInput("ids and sizes differ in length");
  sim::SimShard shard;
  shard.ids = ids;
  shard.response_bytes.reserve(ids.size());
  for (auto b : data_bytes) shard.response_bytes.push_back(get_response_bytes(b));
  shard.payload_bytes = data_bytes;
  return from_sim(sim::simulate_loaders({shard}, sim_config(o)), "tightloop");
}

RunMetrics simulate_trainsim(const RunOptions& o, const TrainSimOptions& train, const std::vector<SampleId>& ids,
                             const std::vector<std::uint64_t>& data_bytes) {
  if (ids.size() != data_bytes.size()) throw InvalidInput("ids and sizes differ in length");
  if (train.consumers == 0) throw InvalidSpec("trainsim needs at least one consumer");
  std::vector<sim::SimShard> shards(train.consumers);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto& s = shards[i % train.consumers];
    s.ids.push_back(ids[i]);
    s.response_bytes.push_back(get_response_bytes(data_bytes[i]));
    s.payload_bytes.push_back(data_bytes[i]);
  }
  auto cfg = sim_config(o);
  const double item_time = train.per_consumer_rate > 0 ? 1.0 / train.per_consumer_rate : 0.0;
  cfg.consumer_item_time_s = item_time;
  const auto r = sim::simulate_loaders(shards, cfg);
  RunMetrics m = from_sim(r, "trainsim");
  m.consumers = train.consumers;
  m.per_consumer_rate = train.per_consumer_rate;
  for (const auto& b : m.batches) {
    m.items_total += b.items;
    m.stall_time += b.wait_time();
    m.duration = std::max(m.duration, b.emit_time + item_time * static_cast<double>(b.items));
  }
  return m;
}

}  // namespace ooload
