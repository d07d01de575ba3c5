// Acceptance gate: one PASS/FAIL line per primary criterion. Exits 1 if any
// criterion fails.

#include <fmt/core.h>
#include <poll.h>
#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "golden_frames.hpp"
#include "ooload/bench/ingest.hpp"
#include "ooload/bench/metrics.hpp"
#include "ooload/bench/runs.hpp"
#include "ooload/core/epoch_plan.hpp"
#include "ooload/core/error.hpp"
#include "ooload/core/rng.hpp"
#include "ooload/core/stats.hpp"
#include "ooload/loader/prefetch_loader.hpp"
#include "ooload/splits/splits.hpp"
#include "ooload/store/net.hpp"
#include "support.hpp"

using namespace ooload;
using namespace std::chrono_literals;

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++g_failures;
  fmt::print("{} {}: {}\n", pass ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
}

void note(const std::string& text) {
  fmt::print("  {}\n", text);
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<SampleId> sorted(std::vector<SampleId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<SampleId> planned_items(const std::vector<SampleId>& ids, const PrefetchConfig& cfg, std::uint64_t e) {
  const auto plan = make_epoch_plan(ids, cfg.batch_size, cfg.seed, e, cfg.drop_last);
  std::vector<SampleId> out;
  for (const auto& b : plan.batches) out.insert(out.end(), b.begin(), b.end());
  return sorted(out);
}

std::vector<std::uint64_t> sizes_of(const SyntheticDataset& ds) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(ds.data_size(i));
  return out;
}

// ---------------------------------------------------------------------------

void exactly_once() {
  const auto t0 = Clock::now();
  test::StoreFixture fx(test::small_spec(5000, 4000.0, 31));
  const auto& names = netsim::NetProfile::preset_names();
  Rng r(2025);
  std::size_t violations = 0, epochs = 0, items = 0;
  std::string first;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + r.uniform_below(5000);
    std::vector<SampleId> ids(fx.dataset->ids().begin(), fx.dataset->ids().begin() + n);
    PrefetchConfig cfg;
    // At most ~200 batches per epoch keeps the run short at any n.
    const std::size_t lo = (n + 199) / 200;
    cfg.batch_size = lo + r.uniform_below(std::max<std::size_t>(lo, 64));
    cfg.out_of_order = r.uniform_below(2);
    cfg.incremental_fill = r.uniform_below(2);
    cfg.drop_last = r.uniform_below(2);
    cfg.continue_across_epochs = r.uniform_below(2);
    cfg.speculative_drain = r.uniform_below(2);
    cfg.prefetch_buffers = 1 + r.uniform_below(8);
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto profile = names[r.uniform_below(names.size())];
    ClientConfig cc;
    cc.endpoints = {fx.server->endpoint()};
    cc.io_workers = 1 + r.uniform_below(4);
    cc.copy_threads = 1;
    // Presets compressed tenfold in time so 200 runs fit the budget.
    auto p = netsim::NetProfile::preset(profile).dilated(0.1);
    p.seed = static_cast<std::uint64_t>(trial);
    cc.netprofile = p;
    auto client = StoreClient::connect(cc);
    PrefetchLoader loader(client, test::kTable, cfg);
    for (std::uint64_t e = 0; e < 2; ++e) {
      std::vector<SampleId> got;
      for (Batch& b : loader.epoch_iter(ids, e)) {
        for (const auto& it : b.buffer.items) got.push_back(it.id);
      }
      ++epochs;
      items += got.size();
      if (sorted(got) != planned_items(ids, cfg, e)) {
        ++violations;
        if (first.empty()) {
          first = fmt::format(" (first: trial {} epoch {} n={} batch={} ooo={} incr={} drop_last={} profile={})",
                              trial, e, n, cfg.batch_size, cfg.out_of_order, cfg.incremental_fill, cfg.drop_last,
                              profile);
        }
      }
    }
  }
  const double t = seconds_since(t0);
  report(violations == 0 && t < 300.0, "exactly-once",
         fmt::format("200 configs, {} epochs, {} items, violations={}{}, runtime {:.1f}s (limit 300s)", epochs, items,
                     violations, first, t));
}

// ---------------------------------------------------------------------------

void transient_bound() {
  test::StoreFixture fx(test::small_spec(1500, 2000.0, 41));
  std::size_t violations = 0;
  double worst = 0.0;
  for (int run = 0; run < 50; ++run) {
    Rng r(static_cast<std::uint64_t>(7000 + run));
    PrefetchConfig cfg;
    cfg.incremental_fill = true;
    cfg.fill_stride = 4;
    cfg.prefetch_buffers = 8;
    cfg.batch_size = 4 + r.uniform_below(13);
    cfg.out_of_order = r.uniform_below(2);
    cfg.seed = static_cast<std::uint64_t>(run);
    ClientConfig cc;
    cc.endpoints = {fx.server->endpoint()};
    cc.io_workers = 2;
    cc.copy_threads = 1;
    auto p = netsim::NetProfile::preset(run % 2 ? "high" : "med").dilated(0.1);
    p.seed = static_cast<std::uint64_t>(run);
    cc.netprofile = p;
    auto client = StoreClient::connect(cc);
    PrefetchLoader loader(client, test::kTable, cfg);
    for (Batch& b : loader.epoch_iter(fx.dataset->ids(), 0)) (void)b;
    for (const auto& is : loader.issue_log()) {
      // issued <= 1.25 * consumed + 1, in integers.
      if (4 * is.issued > 5 * is.consumed + 4) ++violations;
      if (is.consumed > 0) {
        worst = std::max(worst, (static_cast<double>(is.issued) - 1.0) / static_cast<double>(is.consumed));
      }
    }
  }
  report(violations == 0, "transient-bound",
         fmt::format("50 runs, fill_stride 4, max (issued-1)/consumed = {:.4f} (limit 1.25), violations={}", worst,
                     violations));
}

// ---------------------------------------------------------------------------

RunOptions stability_opts(bool ooo, std::size_t epochs) {
  RunOptions o;
  o.profile = netsim::NetProfile::preset("high");
  o.prefetch.out_of_order = ooo;
  o.prefetch.batch_size = 512;
  o.prefetch.prefetch_buffers = 8;
  o.prefetch.incremental_fill = false;
  o.prefetch.speculative_drain = true;
  o.io_workers = 16;
  o.connections_per_worker = 2;
  o.epochs = epochs;
  return o;
}

struct ModeSummary {
  double throughput = 0;
  double wait_median = 0, wait_max = 0;
  double asm_median = 0, asm_max = 0;
  double cv = 0;
};

ModeSummary summarize_mode(const RunMetrics& m) {
  ModeSummary s;
  s.throughput = mean_epoch_throughput(m);
  const auto w = post_transient_waits(m);
  const auto a = post_transient_assembly(m);
  s.wait_median = stats::median(w);
  s.wait_max = stats::max(w);
  s.asm_median = stats::median(a);
  s.asm_max = stats::max(a);
  const auto series = steady_throughput_series(m);
  s.cv = stats::cv(series);
  return s;
}

std::string describe(const char* label, const ModeSummary& s) {
  return fmt::format(
      "{}: throughput {:.3g} B/s, assembly median {:.4f}s max {:.4f}s, wait median {:.4f}s max {:.4f}s, cv {:.4f}",
      label, s.throughput, s.asm_median, s.asm_max, s.wait_median, s.wait_max, s.cv);
}

void stability_and_gain() {
  SyntheticDataset ds(test::small_spec(20000, 115e3, 1));
  note(fmt::format("dataset: {} items, {:.3g} bytes", ds.size(), static_cast<double>(ds.total_bytes())));
  const auto sizes = sizes_of(ds);
  const auto ooo = summarize_mode(simulate_tightloop(stability_opts(true, 3), ds.ids(), sizes));
  const auto ino = summarize_mode(simulate_tightloop(stability_opts(false, 3), ds.ids(), sizes));
  note("oracle " + describe("out-of-order", ooo));
  note("oracle " + describe("in-order", ino));

  // Wall clock: the same runs against an in-process server, dilated tenfold.
  const auto t0 = Clock::now();
  ModeSummary wall_ooo, wall_ino;
  {
    test::StoreFixture fx(test::small_spec(20000, 115e3, 1));
    for (int mode = 0; mode < 2; ++mode) {
      auto o = stability_opts(mode == 0, 2);
      o.endpoints = {fx.server->endpoint()};
      o.time_dilation = 10.0;
      (mode == 0 ? wall_ooo : wall_ino) = summarize_mode(run_tightloop(o, fx.dataset->ids()));
    }
  }
  const double wall_t = seconds_since(t0);
  note("wall-clock " + describe("out-of-order", wall_ooo));
  note("wall-clock " + describe("in-order", wall_ino));
  const double agree_ooo = wall_ooo.throughput / ooo.throughput;
  const double agree_ino = wall_ino.throughput / ino.throughput;
  note(fmt::format("wall-clock/oracle throughput: out-of-order {:.3f}, in-order {:.3f}; wall-clock runtime {:.1f}s",
                   agree_ooo, agree_ino, wall_t));

  const double ooo_spread = ooo.asm_max / ooo.asm_median;
  const double separation = ino.asm_max / ooo.asm_median;
  note(fmt::format("on batch waits instead: out-of-order max/median {:.2f}, in-order max / out-of-order median {:.2f}",
                   ooo.wait_max / ooo.wait_median, ino.wait_max / ooo.wait_median));
  note(fmt::format("wall-clock assembly: out-of-order max/median {:.2f}, in-order max / out-of-order median {:.2f}",
                   wall_ooo.asm_max / wall_ooo.asm_median, wall_ino.asm_max / wall_ooo.asm_median));
  report(ooo_spread <= 3.0 && separation >= 10.0 && wall_t < 600.0, "out-of-order-stability",
         fmt::format("oracle post-transient assembly: out-of-order max/median = {:.2f} (limit 3), "
                     "in-order max / out-of-order median = {:.2f} (limit >= 10); wall-clock {:.1f}s (limit 600s)",
                     ooo_spread, separation, wall_t));

  const double gain = ooo.throughput / ino.throughput;
  const double cv_ratio = ooo.cv / ino.cv;
  note(fmt::format("wall-clock gain {:.2f}, cv ratio {:.3f}", wall_ooo.throughput / wall_ino.throughput,
                   wall_ooo.cv / wall_ino.cv));
  report(gain >= 2.0 && cv_ratio <= 0.5, "out-of-order-gain",
         fmt::format("oracle mean epoch throughput ratio = {:.2f} (limit >= 2), per-100ms cv ratio = {:.3f} "
                     "(limit <= 0.5)",
                     gain, cv_ratio));
}

// ---------------------------------------------------------------------------

void trainsim_utilization() {
  SyntheticDataset ds(test::small_spec(20000, 115e3, 1));
  const auto sizes = sizes_of(ds);
  TrainSimOptions t;
  t.consumers = 8;
  t.per_consumer_rate = 1400.0;
  const double target = 8 * 1400.0;
  bool pass = true;
  std::string detail;
  for (const auto& [profile, limit] : std::vector<std::pair<std::string, double>>{
           {"identity", 0.90}, {"med", 0.90}, {"high-clear", 0.90}, {"high", 0.85}}) {
    RunOptions o;
    o.profile = netsim::NetProfile::preset(profile);
    o.prefetch.out_of_order = true;
    o.prefetch.incremental_fill = true;
    o.prefetch.continue_across_epochs = true;
    o.prefetch.speculative_drain = true;
    o.prefetch.prefetch_buffers = 8;
    o.prefetch.batch_size = 64;
    o.io_workers = 16;
    o.connections_per_worker = 2;
    o.epochs = 8;
    const auto m = simulate_trainsim(o, t, ds.ids(), sizes);
    const double frac = m.achieved_items_per_s() / target;
    pass = pass && frac >= limit;
    detail += fmt::format("{}{} {:.1f} items/s = {:.1f}% (limit {:.0f}%)", detail.empty() ? "" : ", ", profile,
                          m.achieved_items_per_s(), 100 * frac, 100 * limit);
  }
  report(pass, "trainsim-utilization", "oracle, 8 x 1400 items/s: " + detail);
}

// ---------------------------------------------------------------------------

std::size_t golden_mismatches() {
  const auto golden = test::load_golden();
  const auto ours = test::our_frames();
  std::size_t bad = golden.size() == 20 ? 0 : 1;
  for (const auto& [name, g] : golden) {
    const auto it = ours.find(name);
    if (it == ours.end() || it->second != g) ++bad;
  }
  return bad + (ours.size() == golden.size() ? 0 : 1);
}

Blob random_blob(Rng& rng, std::size_t max_len) {
  Blob b(rng.uniform_below(max_len + 1));
  rng.fill(b);
  return b;
}

std::string random_table(Rng& rng) {
  std::string s(rng.uniform_below(24), 'a');
  for (auto& c : s) c = static_cast<char>('a' + rng.uniform_below(26));
  return s;
}

// Encodes 10,000 random messages and decodes them back; returns the frames.
std::size_t roundtrip_failures(std::vector<Blob>& frames, std::vector<bool>& is_req) {
  Rng rng(4242);
  std::size_t bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const bool req = rng.uniform_below(2) == 0;
    const std::uint64_t id = rng.next_u64();
    const std::string table = random_table(rng);
    Blob payload;
    switch (rng.uniform_below(3)) {
      case 0:
        payload = random_blob(rng, 300);
        break;
      case 1:
        payload = wire::encode_get_payload(rng.uniform_below(2)
                                               ? Label::int_class(static_cast<std::int32_t>(rng.next_u64()))
                                               : Label::blob(random_blob(rng, 40)),
                                           random_blob(rng, 200));
        break;
      default: {
        MetadataRecord m{SampleId::random_v4(rng), random_table(rng), random_table(rng), 1, 2, 3};
        payload = wire::encode_atomic_put({random_table(rng), {m.id, Label::int_class(4), random_blob(rng, 100)}, m});
        if (wire::decode_atomic_put(payload).metadata != m) ++bad;
      }
    }
    if (req) {
      const wire::WireRequest m{id, static_cast<wire::Opcode>(1 + rng.uniform_below(6)), table, payload};
      frames.push_back(wire::encode(m));
      if (wire::decode_request(frames.back()) != m) ++bad;
    } else {
      const wire::WireResponse m{id, static_cast<wire::Status>(rng.uniform_below(4)), table, payload};
      frames.push_back(wire::encode(m));
      if (wire::decode_response(frames.back()) != m) ++bad;
    }
    is_req.push_back(req);
  }
  return bad;
}

// Flips one byte at a time; anything but a clean decode or DecodeError counts.
std::size_t corruption_failures(const std::vector<Blob>& frames, const std::vector<bool>& is_req,
                                std::size_t& trials) {
  Rng rng(77);
  std::size_t bad = 0;
  auto attempt = [&](const Blob& frame, bool req) {
    ++trials;
    try {
      if (req) {
        (void)wire::decode_request(frame);
      } else {
        (void)wire::decode_response(frame);
      }
    } catch (const DecodeError&) {
    } catch (...) {
      ++bad;
    }
  };
  for (const auto& [name, frame] : test::load_golden()) {
    for (std::size_t pos = 0; pos < frame.size(); ++pos) {
      for (int k = 0; k < 4; ++k) {
        Blob b = frame;
        b[pos] = static_cast<std::uint8_t>(b[pos] ^ (1 + rng.uniform_below(255)));
        attempt(b, name.rfind("req_", 0) == 0);
      }
    }
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Blob b = frames[i];
    b[rng.uniform_below(b.size())] ^= static_cast<std::uint8_t>(1 + rng.uniform_below(255));
    attempt(b, is_req[i]);
  }
  return bad;
}

// Pipelines 2000 GETs of a 256 kB record on one raw socket without reading,
// then drains. Returns the server's peak in-flight count.
std::size_t server_flood_peak(std::size_t& answered) {
  auto backend = std::make_shared<MemoryBackend>();
  Rng rng(9);
  SampleRecord rec{SampleId::random_v4(rng), Label::int_class(0), Blob(256 * 1024)};
  rng.fill(rec.data);
  backend->put("samples", rec);
  Server server(backend, {});
  net::Fd fd(net::connect_tcp({"127.0.0.1", server.port()}));
  Blob all;
  constexpr std::uint64_t kRequests = 2000;
  for (std::uint64_t i = 0; i < kRequests; ++i) {
    const auto f = wire::encode(wire::WireRequest{i, wire::Opcode::Get, "samples", wire::encode_id(rec.id)});
    all.insert(all.end(), f.begin(), f.end());
  }
  std::size_t off = 0;
  while (off < all.size()) {
    const auto n = ::send(fd.get(), all.data() + off, all.size() - off, MSG_NOSIGNAL);
    if (n > 0) {
      off += static_cast<std::size_t>(n);
      continue;
    }
    pollfd p{fd.get(), POLLOUT, 0};
    if (::poll(&p, 1, 5000) <= 0) break;
  }
  std::this_thread::sleep_for(500ms);
  wire::FrameReader reader;
  answered = 0;
  while (answered < kRequests) {
    if (auto f = reader.next()) {
      ++answered;
      continue;
    }
    auto buf = reader.prepare(256 * 1024);
    const auto n = ::recv(fd.get(), buf.data(), buf.size(), 0);
    if (n > 0) {
      reader.commit(static_cast<std::size_t>(n));
    } else if (n == 0) {
      break;
    } else {
      pollfd p{fd.get(), POLLIN, 0};
      if (::poll(&p, 1, 5000) <= 0) break;
    }
  }
  return server.stats().max_inflight_seen;
}

class CountingTarget : public ReplyTarget {
 public:
  explicit CountingTarget(std::size_t expected) : expected_(expected) {}
  void on_reply(std::size_t, const Reply&) override {
    if (++count_ == expected_) done_.set_value();
  }
  std::future<void> done() { return done_.get_future(); }

 private:
  std::size_t expected_;
  std::atomic<std::size_t> count_{0};
  std::promise<void> done_;
};

// Submits 5000 GETs at once on a single client connection.
std::size_t client_flood_peak() {
  test::StoreFixture fx(test::small_spec(50, 64e3, 3));
  auto client = fx.connect(1, 1);
  const std::vector<SampleId> ids(5000, fx.dataset->ids().front());
  auto target = std::make_shared<CountingTarget>(ids.size());
  auto done = target->done();
  client->submit_gets(test::kTable, ids, target, 0);
  if (done.wait_for(60s) != std::future_status::ready) return ~std::size_t{0};
  return client->counters().max_inflight_seen;
}

void protocol() {
  const std::size_t golden_bad = golden_mismatches();
  std::vector<Blob> frames;
  std::vector<bool> is_req;
  const std::size_t rt_bad = roundtrip_failures(frames, is_req);
  std::size_t trials = 0;
  const std::size_t corrupt_bad = corruption_failures(frames, is_req, trials);
  std::size_t answered = 0;
  const std::size_t server_peak = server_flood_peak(answered);
  const std::size_t client_peak = client_flood_peak();
  report(golden_bad == 0 && rt_bad == 0 && corrupt_bad == 0 && server_peak <= 1024 && answered == 2000 &&
             client_peak <= 1024,
         "protocol-conformance",
         fmt::format("golden mismatches {}/20, roundtrip failures {}/{}, corruption trials {} with {} non-DecodeError "
                     "outcomes, server in-flight peak {} ({} of 2000 answered), client in-flight peak {} (limit 1024)",
                     golden_bad, rt_bad, frames.size(), trials, corrupt_bad, server_peak, answered, client_peak));
}

// ---------------------------------------------------------------------------

void atomic_coinsert() {
  auto backend = std::make_shared<MemoryBackend>();
  Server server(backend, {});
  auto spec = test::small_spec(10000, 500.0, 17);
  SyntheticDataset ds(spec);
  ClientConfig cc;
  cc.endpoints = {server.endpoint()};
  cc.io_workers = 2;
  cc.copy_threads = 1;
  auto writer = StoreClient::connect(cc);
  auto reader = StoreClient::connect(cc);

  std::atomic<bool> done{false};
  std::atomic<std::size_t> violations{0}, audits{0}, checked{0};
  std::thread backend_auditor([&] {
    while (!done.load()) {
      try {
        for (const auto& id : backend->list_ids(test::kTable)) {
          if (!backend->get_metadata(test::kMetaTable, id)) ++violations;
          ++checked;
        }
        for (const auto& id : backend->list_ids(test::kMetaTable)) {
          if (!backend->get(test::kTable, id)) ++violations;
          ++checked;
        }
        ++audits;
      } catch (const NotFound&) {
      }
      std::this_thread::yield();
    }
  });
  // The same audit through the wire, on the newest ids of each listing.
  std::thread wire_auditor([&] {
    while (!done.load()) {
      try {
        const auto ids = reader->list_ids(test::kTable);
        for (std::size_t i = ids.size() > 50 ? ids.size() - 50 : 0; i < ids.size(); ++i) {
          if (!reader->get_metadata(test::kMetaTable, ids[i])) ++violations;
          ++checked;
        }
        ++audits;
      } catch (const NotFound&) {
        // Table not created yet.
      }
    }
  });
  IngestOptions io;
  io.parallelism = 8;
  const auto rep = ingest_synthetic(*writer, io, ds);
  done = true;
  backend_auditor.join();
  wire_auditor.join();
  const std::size_t stored = backend->table_size(test::kTable);
  const std::size_t meta = backend->table_size(test::kMetaTable);
  report(violations == 0 && rep.count == 10000 && stored == 10000 && meta == 10000, "atomic-co-insert",
         fmt::format("10000 atomic ingests, {} audit passes, {} checks, violations={}, stored {} data / {} metadata",
                     audits.load(), checked.load(), violations.load(), stored, meta));
}

// ---------------------------------------------------------------------------

void splits() {
  SyntheticDatasetSpec s;
  s.num_samples = 10000;
  s.num_entities = 500;
  s.mean_size = 100;
  s.seed = 1;
  SyntheticDataset ds(s);
  std::vector<MetadataRecord> md;
  for (std::size_t i = 0; i < ds.size(); ++i) md.push_back(ds.metadata(i));
  SplitSpec spec;
  spec.ratios = {0.8, 0.1, 0.1};
  spec.seed = 5;
  const auto r = create_splits(md, spec);
  const auto again = create_splits(md, spec);

  // Independent recount of entity overlap and size deviation.
  std::map<SampleId, const MetadataRecord*> by_id;
  for (const auto& m : md) by_id[m.id] = &m;
  std::map<std::string, std::set<std::size_t>> entity_splits;
  std::size_t total = 0;
  for (std::size_t k = 0; k < r.splits.size(); ++k) {
    for (const auto& id : r.splits[k]) entity_splits[by_id.at(id)->entity_id].insert(k);
    total += r.splits[k].size();
  }
  std::size_t entity_violations = 0;
  for (const auto& [e, ks] : entity_splits) entity_violations += ks.size() > 1;
  double size_dev = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double frac = static_cast<double>(r.splits[k].size()) / static_cast<double>(total);
    size_dev = std::max(size_dev, std::abs(frac - spec.ratios[k]) / spec.ratios[k]);
  }

  // Rebalance the training split to uniform class proportions.
  std::map<std::int32_t, double> target;
  for (std::int32_t c = 0; c < 10; ++c) target[c] = 0.1;
  const double tol = 0.02;
  const auto rb = class_rebalance(r.splits[0], md, target, 3, tol);
  const auto rb_again = class_rebalance(r.splits[0], md, target, 3, tol);
  std::map<std::int32_t, std::size_t> hist;
  for (const auto& id : rb.kept) ++hist[by_id.at(id)->class_label];
  double class_dev = 0;
  for (const auto& [c, p] : target) {
    class_dev = std::max(class_dev,
                         std::abs(static_cast<double>(hist[c]) / static_cast<double>(rb.kept.size()) - p));
  }
  const bool deterministic = r == again && rb.kept == rb_again.kept && rb.dropped == rb_again.dropped;
  report(entity_violations == 0 && total == 10000 && size_dev <= 0.02 && class_dev <= tol + 1e-12 && deterministic,
         "splits",
         fmt::format("10000 records / 500 entities, ratios 0.8/0.1/0.1: entity violations {}, max relative size "
                     "deviation {:.4f} (limit 0.02), rebalance to uniform classes keeps {} with max class deviation "
                     "{:.4f} (limit {}), deterministic {}",
                     entity_violations, size_dev, rb.kept.size(), class_dev, tol, deterministic));
}

// ---------------------------------------------------------------------------

void epoch_plan_arithmetic() {
  constexpr std::size_t n = 1'281'167, bs = 512;
  // Oracle: ceil division and the remainder.
  const std::size_t want_batches = (n + bs - 1) / bs;
  const std::size_t want_last = n - (want_batches - 1) * bs;
  SampleIdGenerator gen(1);
  std::vector<SampleId> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(gen.next());
  const auto plan = make_epoch_plan(ids, bs, 0, 0, false);
  const auto dropped = make_epoch_plan(ids, bs, 0, 0, true);
  const bool ok = want_batches == 2503 && plan.num_batches() == want_batches &&
                  plan.batches.back().size() == want_last && plan_consistency_check(plan, ids) &&
                  dropped.num_batches() == want_batches - 1;
  report(ok, "epoch-plan-arithmetic",
         fmt::format("{} ids at batch {}: {} batches, final batch {} (oracle {} / {}; drop_last gives {})", n, bs,
                     plan.num_batches(), plan.batches.back().size(), want_batches, want_last,
                     dropped.num_batches()));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const std::vector<std::pair<const char*, void (*)()>> criteria{
      {"exactly-once", exactly_once},
      {"transient-bound", transient_bound},
      {"out-of-order stability and gain", stability_and_gain},
      {"trainsim-utilization", trainsim_utilization},
      {"protocol-conformance", protocol},
      {"atomic-co-insert", atomic_coinsert},
      {"splits", splits},
      {"epoch-plan-arithmetic", epoch_plan_arithmetic},
  };
  for (const auto& [name, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, fmt::format("threw {}", e.what()));
    }
  }
  fmt::print("{} criterion line(s) failed, total {:.1f}s\n", g_failures, seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
