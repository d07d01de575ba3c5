#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "ooload/bench/metrics.hpp"
#include "ooload/bench/runs.hpp"
#include "ooload/client/dispatch.hpp"
#include "ooload/client/epoch_fetch.hpp"
#include "ooload/client/link_estimator.hpp"
#include "ooload/client/speculation.hpp"
#include "ooload/core/error.hpp"
#include "ooload/loader/fill_schedule.hpp"
#include "ooload/loader/loader_sim.hpp"
#include "ooload/loader/prefetch_loader.hpp"
#include "support.hpp"

namespace ooload {
namespace {

using test::StoreFixture;

std::vector<SampleId> sorted(std::vector<SampleId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<SampleId> planned_items(const std::vector<SampleId>& ids, const PrefetchConfig& cfg,
                                    std::uint64_t epoch) {
  const auto plan = make_epoch_plan(ids, cfg.batch_size, cfg.seed, epoch, cfg.drop_last);
  std::vector<SampleId> out;
  for (const auto& b : plan.batches) out.insert(out.end(), b.begin(), b.end());
  return sorted(out);
}

TEST(Dispatch, EqualLoadsSpreadEvenly) {
  std::vector<std::size_t> load(16, 0);
  std::size_t cursor = 0;
  for (int i = 0; i < 512; ++i) {
    const auto c = pick_least_loaded<std::size_t>(load, 1024, cursor);
    ASSERT_NE(c, kNoConnection);
    ++load[c];
    cursor = (c + 1) % load.size();
  }
  for (auto l : load) EXPECT_NEAR(static_cast<double>(l), 32.0, 1.0);
}

TEST(Dispatch, UnevenStartAndCap) {
  std::vector<std::size_t> load{5, 0, 3, 2};
  EXPECT_EQ(pick_least_loaded<std::size_t>(load, 10, 0), 1u);
  std::vector<std::size_t> full{4, 4, 4};
  EXPECT_EQ(pick_least_loaded<std::size_t>(full, 4, 0), kNoConnection);
  std::vector<std::size_t> tie{1, 1, 1};
  EXPECT_EQ(pick_least_loaded<std::size_t>(tie, 4, 2), 2u);
}

TEST(Dispatch, RandomCompletionsKeepLoadsBalanced) {
  Rng r(3);
  std::vector<std::size_t> load(16, 0);
  std::size_t cursor = 0;
  for (int i = 0; i < 20000; ++i) {
    if (r.uniform_below(2) == 0) {
      const auto c = pick_least_loaded<std::size_t>(load, 64, cursor);
      if (c != kNoConnection) ++load[c], cursor = (c + 1) % 16;
    } else {
      const auto c = r.uniform_below(16);
      if (load[c] > 0) --load[c];
    }
    const auto [lo, hi] = std::minmax_element(load.begin(), load.end());
    ASSERT_LE(*hi - *lo, 64u);
  }
}

TEST(LinkEstimator, LearnsTransferCostOfQueuedResponses) {
  LinkEstimator e;
  EXPECT_FALSE(e.ready());
  // 10 ms floor, 1 us per byte, 1000-byte responses all issued at t = 0.
  for (int i = 1; i <= 20; ++i) e.on_response(0.010 + i * 0.001, 0.0, 1000);
  EXPECT_TRUE(e.ready());
  EXPECT_NEAR(e.min_latency(), 0.011, 1e-12);
  EXPECT_NEAR(e.seconds_per_byte(), 1e-6, 1e-12);
}

TEST(Speculation, CopiesTailFromSlowToIdleConnection) {
  LinkEstimator slow, fast;
  for (int i = 1; i <= 10; ++i) {
    slow.on_response(0.01 + i * 0.1, 0.0, 1000);    // 100 us per byte
    fast.on_response(0.01 + i * 0.001, 0.0, 1000);  // 1 us per byte
  }
  std::vector<SpecConn> conns(2);
  conns[0].estimator = &slow;
  conns[1].estimator = &fast;
  for (int i = 0; i < 5; ++i) conns[0].items.push_back({1000, 1.0, true});
  const auto moves = plan_speculation(conns, 1.0, 1024);
  ASSERT_FALSE(moves.empty());
  for (const auto& m : moves) {
    EXPECT_EQ(m.from_conn, 0u);
    EXPECT_EQ(m.to_conn, 1u);
  }
  // The newest request is the one expected to land last, so it moves first.
  EXPECT_EQ(moves.front().item, 4u);
  std::set<std::size_t> moved;
  for (const auto& m : moves) EXPECT_TRUE(moved.insert(m.item).second);
  // Nothing moves while estimators are cold or when items are not hedgeable.
  LinkEstimator cold;
  conns[1].estimator = &cold;
  EXPECT_TRUE(plan_speculation(conns, 1.0, 1024).empty());
  conns[1].estimator = &fast;
  for (auto& it : conns[0].items) it.hedgeable = false;
  EXPECT_TRUE(plan_speculation(conns, 1.0, 1024).empty());
}

TEST(FillSchedule, IncrementalTargetsGrowByOnePerStride) {
  FillSchedule f(8, true, 4);
  std::vector<std::size_t> got;
  for (std::size_t c = 0; c < 29; ++c) got.push_back(f.target(c));
  const std::vector<std::size_t> want{1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5,
                                      6, 6, 6, 6, 7, 7, 7, 7, 8};
  EXPECT_EQ(got, want);
  EXPECT_EQ(f.target(1000), 8u);
  FillSchedule full(8, false, 4);
  EXPECT_EQ(full.initial(), 8u);
  EXPECT_EQ(full.issued_after(0, 3), 3u);
  // (issued - 1) / consumed never exceeds 1 + 1 / stride.
  for (std::size_t c = 1; c < 200; ++c) {
    EXPECT_LE(static_cast<double>(f.issued_after(c, 1000) - 1) / static_cast<double>(c), 1.25 + 1e-12);
  }
}

TEST(EpochFetchPool, TakeFollowsArrivalOrderAcrossBatches) {
  SampleIdGenerator gen(1);
  std::vector<SampleId> ids(8);
  for (auto& id : ids) id = gen.next();
  auto plan = std::make_shared<EpochPlan>();
  plan->batch_size = 4;
  plan->batches = {{ids[0], ids[1], ids[2], ids[3]}, {ids[4], ids[5], ids[6], ids[7]}};
  auto fetch = std::make_shared<EpochFetch>(plan, "t", true);
  fetch->mark_requested(0, 0.0);
  fetch->mark_requested(1, 0.0);
  const Blob data{9};
  const auto payload = wire::encode_get_payload(Label::int_class(1), data);
  auto arrive = [&](std::size_t idx, double at) {
    Reply r;
    r.payload = payload;
    r.arrived_at = at;
    fetch->on_reply(idx, r);
  };
  // a1, b1, b2, a2
  arrive(0, 1.0);
  arrive(4, 2.0);
  arrive(5, 3.0);
  const auto soon = std::chrono::steady_clock::now() + std::chrono::milliseconds(20);
  EXPECT_FALSE(fetch->wait_pool(4, soon));
  EXPECT_THROW(fetch->take(4), StateError);
  arrive(1, 4.0);
  ASSERT_TRUE(fetch->wait_pool(4, std::chrono::steady_clock::now()));
  const auto first = fetch->take(4);
  ASSERT_EQ(first.items.size(), 4u);
  EXPECT_EQ(first.items[0].id, ids[0]);
  EXPECT_EQ(first.items[1].id, ids[4]);
  EXPECT_EQ(first.items[2].id, ids[5]);
  EXPECT_EQ(first.items[3].id, ids[1]);
  EXPECT_DOUBLE_EQ(first.ready_time, 4.0);
  EXPECT_FALSE(first.drained);
  arrive(1, 5.0);
  EXPECT_EQ(fetch->duplicates(), 1u);
}

TEST(Client, ConnectToStoppedServerFails) {
  std::string endpoint;
  {
    Server s(std::make_shared<MemoryBackend>(), ServerConfig{});
    endpoint = s.endpoint();
  }
  ClientConfig cc;
  cc.endpoints = {endpoint};
  cc.io_workers = 1;
  cc.connect_timeout = std::chrono::milliseconds(500);
  EXPECT_THROW(StoreClient::connect(cc), ConnectError);
}

TEST(Client, ConnectionCountFollowsWorkers) {
  StoreFixture fx(test::small_spec(4));
  EXPECT_EQ(fx.connect(8, 2)->num_connections(), 16u);
  EXPECT_EQ(fx.connect(16, 2)->num_connections(), 32u);
}

TEST(Client, SingleIdIsOneRequestOnOneConnection) {
  StoreFixture fx(test::small_spec(4));
  auto client = fx.connect(4, 2);
  PrefetchConfig cfg;
  cfg.batch_size = 1;
  PrefetchLoader loader(client, test::kTable, cfg);
  const std::vector<SampleId> one{fx.dataset->ids()[2]};
  std::size_t batches = 0;
  for (Batch& b : loader.epoch_iter(one, 0)) {
    ++batches;
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b.buffer.items[0].id, one[0]);
  }
  EXPECT_EQ(batches, 1u);
  const auto c = client->counters();
  EXPECT_EQ(c.requests, 1u);
  std::size_t used = 0;
  for (const auto& conn : c.connections) used += conn.arrivals > 0;
  EXPECT_EQ(used, 1u);
}

TEST(Client, AbsentIdFailsTheBatchByName) {
  StoreFixture fx(test::small_spec(20));
  auto client = fx.connect();
  auto ids = fx.dataset->ids();
  const auto ghost = derive_sample_id("ghost", 99);
  ids.push_back(ghost);
  for (bool ooo : {false, true}) {
    PrefetchConfig cfg;
    cfg.batch_size = 32;
    cfg.out_of_order = ooo;
    PrefetchLoader loader(client, test::kTable, cfg);
    loader.start_epoch(ids, 0);
    try {
      while (loader.next_batch()) {
      }
      ADD_FAILURE() << "expected BatchError";
    } catch (const BatchError& e) {
      ASSERT_EQ(e.failed_ids().size(), 1u);
      EXPECT_NE(e.failed_ids()[0].find(ghost.str()), std::string::npos);
      EXPECT_NE(std::string(e.what()).find(ghost.str()), std::string::npos);
    }
  }
}

TEST(Loader, InitialOutstandingFollowsFillMode) {
  StoreFixture fx(test::small_spec(400, 500.0));
  auto client = fx.connect();
  PrefetchConfig cfg;
  cfg.batch_size = 4;
  {
    PrefetchLoader l(client, test::kTable, cfg);
    l.start_epoch(fx.dataset->ids(), 0);
    EXPECT_EQ(l.outstanding(), 8u);
    while (l.next_batch()) {
    }
  }
  {
    cfg.incremental_fill = true;
    PrefetchLoader l(client, test::kTable, cfg);
    l.start_epoch(fx.dataset->ids(), 0);
    EXPECT_EQ(l.outstanding(), 1u);
    while (l.next_batch()) {
    }
  }
  {
    cfg.incremental_fill = false;
    PrefetchLoader l(client, test::kTable, cfg);
    const std::vector<SampleId> small(fx.dataset->ids().begin(), fx.dataset->ids().begin() + 12);
    l.start_epoch(small, 0);
    EXPECT_EQ(l.outstanding(), 3u);
    EXPECT_THROW(l.start_epoch(small, 1), StateError);
    while (l.next_batch()) {
    }
    EXPECT_THROW(l.start_epoch({}, 1), InvalidInput);
  }
}

TEST(Loader, IncrementalIssueLogStaysWithinTransientBound) {
  StoreFixture fx(test::small_spec(600, 300.0));
  auto client = fx.connect();
  PrefetchConfig cfg;
  cfg.batch_size = 4;
  cfg.incremental_fill = true;
  cfg.out_of_order = true;
  PrefetchLoader l(client, test::kTable, cfg);
  for (Batch& b : l.epoch_iter(fx.dataset->ids(), 0)) (void)b;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& i : l.issue_log()) {
    pairs.emplace_back(i.consumed, i.issued);
    EXPECT_LE(i.outstanding, 8u);
  }
  ASSERT_EQ(pairs.size(), 150u);
  EXPECT_LE(transient_ratio(pairs), 1.25);
  // Outstanding after k consumed batches: min(8, 1 + k / 4), clamped at the end.
  FillSchedule f(8, true, 4);
  for (const auto& i : l.issue_log()) EXPECT_EQ(i.outstanding, f.issued_after(i.consumed, 150) - i.consumed);
}

TEST(Loader, ConsecutiveEpochsUseDistinctOrders) {
  StoreFixture fx(test::small_spec(64, 200.0));
  auto client = fx.connect();
  PrefetchConfig cfg;
  cfg.batch_size = 8;
  PrefetchLoader l(client, test::kTable, cfg);
  std::vector<std::vector<SampleId>> orders;
  for (std::uint64_t e = 0; e < 2; ++e) {
    orders.emplace_back();
    for (Batch& b : l.epoch_iter(fx.dataset->ids(), e)) {
      for (const auto& it : b.buffer.items) orders.back().push_back(it.id);
    }
  }
  EXPECT_NE(orders[0], orders[1]);
  EXPECT_EQ(sorted(orders[0]), sorted(orders[1]));
}

TEST(Loader, ExactlyOnceOverRandomConfigs) {
  StoreFixture fx(test::small_spec(300, 400.0));
  Rng r(21);
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t n = 1 + r.uniform_below(300);
    std::vector<SampleId> ids(fx.dataset->ids().begin(), fx.dataset->ids().begin() + n);
    PrefetchConfig cfg;
    cfg.batch_size = 1 + r.uniform_below(40);
    cfg.out_of_order = r.uniform_below(2);
    cfg.incremental_fill = r.uniform_below(2);
    cfg.drop_last = r.uniform_below(2);
    cfg.prefetch_buffers = 1 + r.uniform_below(8);
    cfg.speculative_drain = r.uniform_below(2);
    cfg.seed = trial;
    ClientConfig cc;
    cc.endpoints = {fx.server->endpoint()};
    cc.io_workers = 1 + r.uniform_below(3);
    cc.copy_threads = 1;
    if (r.uniform_below(2)) {
      netsim::NetProfile p;
      p.name = "rand";
      p.rtt_s = 1e-3 * static_cast<double>(r.uniform_below(4));
      p.bandwidth_bytes_per_s = 2e6 + 1e6 * static_cast<double>(r.uniform_below(20));
      p.congested_fraction = 0.5;
      p.congestion_factor = 0.25;
      p.jitter_s = 1e-4;
      p.seed = trial;
      cc.netprofile = p;
    }
    auto client = StoreClient::connect(cc);
    PrefetchLoader l(client, test::kTable, cfg);
    for (std::uint64_t e = 0; e < 2; ++e) {
      std::vector<SampleId> got;
      std::size_t batches = 0;
      for (Batch& b : l.epoch_iter(ids, e)) {
        ++batches;
        EXPECT_LE(b.size(), cfg.batch_size);
        for (const auto& it : b.buffer.items) got.push_back(it.id);
      }
      ASSERT_EQ(sorted(got), planned_items(ids, cfg, e))
          << "trial " << trial << " n=" << n << " bs=" << cfg.batch_size << " ooo=" << cfg.out_of_order;
    }
  }
}

TEST(Loader, OutOfOrderAndInOrderChecksumsAgree) {
  StoreFixture fx(test::small_spec(500, 1500.0));
  auto client = fx.connect();
  std::uint64_t sums[2] = {0, 0};
  for (int ooo = 0; ooo < 2; ++ooo) {
    PrefetchConfig cfg;
    cfg.batch_size = 16;
    cfg.out_of_order = ooo;
    PrefetchLoader l(client, test::kTable, cfg);
    for (Batch& b : l.epoch_iter(fx.dataset->ids(), 0)) sums[ooo] += b.checksum();
  }
  EXPECT_EQ(sums[0], sums[1]);
}

sim::SimShard shard_of(std::size_t n, std::uint64_t bytes, std::uint64_t seed = 1) {
  SampleIdGenerator gen(seed);
  sim::SimShard s;
  for (std::size_t i = 0; i < n; ++i) {
    s.ids.push_back(gen.next());
    s.response_bytes.push_back(bytes);
  }
  return s;
}

TEST(LoaderSim, ExactlyOnceOverRandomConfigs) {
  Rng r(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<sim::SimShard> shards;
    const std::size_t loaders = 1 + r.uniform_below(3);
    for (std::size_t k = 0; k < loaders; ++k) {
      auto s = shard_of(1 + r.uniform_below(400), 0, trial * 10 + k);
      for (auto& b : s.response_bytes) b = 100 + r.uniform_below(200'000);
      shards.push_back(std::move(s));
    }
    sim::LoaderSimConfig cfg;
    cfg.prefetch.batch_size = 1 + r.uniform_below(64);
    cfg.prefetch.out_of_order = r.uniform_below(2);
    cfg.prefetch.incremental_fill = r.uniform_below(2);
    cfg.prefetch.drop_last = r.uniform_below(2);
    cfg.prefetch.continue_across_epochs = r.uniform_below(2);
    cfg.prefetch.speculative_drain = r.uniform_below(2);
    cfg.prefetch.prefetch_buffers = 1 + r.uniform_below(8);
    cfg.prefetch.seed = trial;
    const auto& names = netsim::NetProfile::preset_names();
    cfg.profile = netsim::NetProfile::preset(names[r.uniform_below(names.size())]);
    cfg.num_connections = 1 + r.uniform_below(32);
    cfg.epochs = 1 + r.uniform_below(3);
    cfg.record_items = true;
    const auto res = sim::simulate_loaders(shards, cfg);
    for (std::size_t k = 0; k < loaders; ++k) {
      for (std::uint64_t e = 0; e < cfg.epochs; ++e) {
        std::vector<SampleId> got;
        for (const auto& b : res.batches) {
          if (b.loader == k && b.epoch == e) got.insert(got.end(), b.ids.begin(), b.ids.end());
        }
        ASSERT_EQ(sorted(got), planned_items(shards[k].ids, cfg.prefetch, e)) << "trial " << trial;
      }
    }
  }
}

TEST(LoaderSim, InOrderAssemblyWaitsForSlowestConnection) {
  // Four 10 MB/s links, one of them at a tenth of that; one batch of eight
  // 1 MB items puts two items on every link.
  sim::LoaderSimConfig cfg;
  cfg.prefetch.batch_size = 8;
  cfg.profile.name = "one-slow";
  cfg.profile.bandwidth_bytes_per_s = 10e6;
  cfg.profile.congested_fraction = 0.25;
  cfg.profile.congestion_factor = 0.1;
  cfg.num_connections = 4;
  const auto shards = std::vector<sim::SimShard>{shard_of(8, 1'000'000)};
  const auto res = sim::simulate_loaders(shards, cfg);
  ASSERT_EQ(res.batches.size(), 1u);
  const double slow = 2'000'000 / 1e6;
  EXPECT_GE(res.batches[0].assembly_time(), slow);
  EXPECT_LT(res.batches[0].assembly_time(), slow * 1.1);
}

TEST(LoaderSim, OutOfOrderDoesNotWaitOnCongestedLink) {
  sim::LoaderSimConfig cfg;
  cfg.prefetch.batch_size = 8;
  cfg.prefetch.out_of_order = true;
  cfg.prefetch.prefetch_buffers = 2;
  cfg.profile.name = "one-slow";
  cfg.profile.bandwidth_bytes_per_s = 10e6;
  cfg.profile.congested_fraction = 0.25;
  cfg.profile.congestion_factor = 0.1;
  cfg.num_connections = 4;
  const auto res = sim::simulate_loaders({shard_of(16, 1'000'000)}, cfg);
  ASSERT_GE(res.batches.size(), 2u);
  // Eight items arrive on the three fast links by 0.3 s; the slow link has
  // delivered nothing by then.
  EXPECT_LT(res.batches[0].emit_time, 0.35);
  auto in_order = cfg;
  in_order.prefetch.out_of_order = false;
  const auto ref = sim::simulate_loaders({shard_of(16, 1'000'000)}, in_order);
  EXPECT_GT(ref.batches[0].emit_time, 1.0);
}

TEST(LoaderSim, IncrementalTransientRatioOverSeeds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    sim::LoaderSimConfig cfg;
    cfg.prefetch.batch_size = 16;
    cfg.prefetch.incremental_fill = true;
    cfg.prefetch.out_of_order = seed % 2;
    cfg.prefetch.seed = seed;
    cfg.profile = netsim::NetProfile::preset("high");
    cfg.profile.seed = seed;
    const auto res = sim::simulate_loaders({shard_of(800, 50'000, seed)}, cfg);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& i : res.issues) pairs.emplace_back(i.consumed, i.issued);
    ASSERT_FALSE(pairs.empty());
    EXPECT_LE(transient_ratio(pairs), 1.25) << seed;
  }
}

}  // namespace
}  // namespace ooload
