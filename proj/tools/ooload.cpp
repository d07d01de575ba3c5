// ooload: blob store server, ingestion, split generation and the two loader
// experiments (tight loop, simulated training).

#include <algorithm>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ooload/bench/ingest.hpp"
#include "ooload/bench/metrics.hpp"
#include "ooload/bench/report.hpp"
#include "ooload/bench/runs.hpp"
#include "ooload/bench/synthetic.hpp"
#include "ooload/client/client.hpp"
#include "ooload/core/error.hpp"
#include "ooload/splits/splits.hpp"
#include "ooload/store/backend.hpp"
#include "ooload/store/server.hpp"

namespace fs = std::filesystem;
using namespace ooload;

namespace {

std::atomic<bool> g_interrupt{false};

void on_signal(int) { g_interrupt.store(true); }

void install_signals() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

bool on_off(const std::string& v) { return v == "on"; }

struct SynthFlags {
  std::size_t samples = 20000;
  double mean_size = 115e3;
  double sigma = 0.5;
  std::size_t classes = 10;
  std::size_t entities = 500;
  double skew = 1.0;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--samples", samples, "Number of samples")->capture_default_str();
    app->add_option("--mean-size", mean_size, "Mean payload bytes")->capture_default_str();
    app->add_option("--sigma", sigma, "Lognormal sigma of payload sizes")->capture_default_str();
    app->add_option("--classes", classes, "Number of classes")->capture_default_str();
    app->add_option("--entities", entities, "Number of entities")->capture_default_str();
    app->add_option("--class-skew", skew, "Zipf exponent of class weights")->capture_default_str();
    app->add_option("--data-seed", seed, "Dataset seed")->capture_default_str();
  }
  SyntheticDatasetSpec spec() const {
    SyntheticDatasetSpec s;
    s.num_samples = samples;
    s.mean_size = mean_size;
    s.sigma = sigma;
    s.num_classes = classes;
    s.num_entities = entities;
    s.class_skew = skew;
    s.seed = seed;
    s.validate();
    return s;
  }
};

struct RunFlags {
  std::string endpoint;
  std::string profile = "identity";
  std::string ooo = "on";
  std::string incremental = "on";
  std::string speculate = "on";
  std::string carry = "off";
  std::size_t buffers = 8;
  std::size_t io_workers = 16;
  std::size_t per_worker = 2;
  std::size_t batch_size = 512;
  std::uint64_t seed = 0;
  std::size_t epochs = 1;
  std::string out;
  double dilation = 1.0;
  std::string ids_file;
  std::string table = "samples";
  bool embedded = false;
  bool oracle = false;
  SynthFlags synth;

  void add(CLI::App* app) {
    app->add_option("--endpoint", endpoint, "host:port of the store");
    app->add_option("--profile", profile, "identity|low|med|high|high-clear or a profile file")
        ->capture_default_str();
    app->add_option("--ooo", ooo, "Out-of-order assembly")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
    app->add_option("--incremental", incremental, "Incremental 4:1 buffer fill")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    app->add_option("--speculate", speculate, "Re-issue slow tail requests while an epoch drains")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    app->add_option("--continue", carry, "Prefetch into the next epoch while the current one drains")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    app->add_option("--buffers", buffers, "Prefetch buffers")->capture_default_str();
    app->add_option("--io-workers", io_workers, "Client I/O threads")->capture_default_str();
    app->add_option("--connections-per-worker", per_worker, "TCP connections per I/O thread")->capture_default_str();
    app->add_option("--batch-size", batch_size, "Items per batch")->capture_default_str();
    app->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
    app->add_option("--epochs", epochs, "Epochs to run")->capture_default_str();
    app->add_option("--out", out, "Directory for the CSV output");
    app->add_option("--dilation", dilation, "Slow simulated time down by this factor")->capture_default_str();
    app->add_option("--ids", ids_file, "Split file (one id per line); default: every stored id");
    app->add_option("--table", table, "Data table")->capture_default_str();
    app->add_flag("--embedded", embedded, "Serve a synthetic dataset in-process instead of --endpoint");
    app->add_flag("--oracle", oracle, "Replay the run in the discrete-event simulator (synthetic data only)");
    synth.add(app);
  }

  RunOptions options() const {
    RunOptions o;
    if (!endpoint.empty()) o.endpoints = {endpoint};
    o.table = table;
    o.prefetch.prefetch_buffers = buffers;
    o.prefetch.out_of_order = on_off(ooo);
    o.prefetch.incremental_fill = on_off(incremental);
    o.prefetch.speculative_drain = on_off(speculate);
    o.prefetch.continue_across_epochs = on_off(carry);
    o.prefetch.batch_size = batch_size;
    o.prefetch.seed = seed;
    o.io_workers = io_workers;
    o.connections_per_worker = per_worker;
    o.profile = netsim::NetProfile::resolve(profile);
    o.time_dilation = dilation;
    o.epochs = epochs;
    o.interrupt = &g_interrupt;
    return o;
  }
};

// A server over a synthetic dataset living in this process.
struct Embedded {
  std::unique_ptr<SyntheticDataset> ds;
  std::unique_ptr<Server> server;
};

Embedded start_embedded(const SyntheticDatasetSpec& spec, const std::string& table) {
  Embedded e;
  e.ds = std::make_unique<SyntheticDataset>(spec);
  auto backend = std::make_shared<MemoryBackend>();
  for (std::size_t i = 0; i < e.ds->size(); ++i) {
    backend->put_atomic(table, table + "_meta", e.ds->record(i), e.ds->metadata(i));
  }
  e.server = std::make_unique<Server>(backend, ServerConfig{});
  spdlog::info("embedded store at {} with {} samples ({:.1f} MB)", e.server->endpoint(), e.ds->size(),
               static_cast<double>(e.ds->total_bytes()) / 1e6);
  return e;
}

std::vector<SampleId> load_ids(const RunFlags& f, const RunOptions& o, const SyntheticDataset* ds) {
  if (!f.ids_file.empty()) return read_uuid_list(f.ids_file);
  if (ds) return ds->ids();
  ClientConfig cc;
  cc.endpoints = o.endpoints;
  cc.io_workers = 1;
  cc.connections_per_worker = 1;
  auto ids = StoreClient::connect(cc)->list_ids(o.table);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void finish_run(const RunMetrics& m, const std::string& out) {
  std::cout << format_report(m);
  if (!out.empty()) {
    write_run(m, out);
    spdlog::info("wrote {}", out);
  }
}

int run_experiment(const RunFlags& f, const TrainSimOptions* train) {
  auto o = f.options();
  if (f.oracle) {
    const SyntheticDataset ds(f.synth.spec());
    std::vector<std::uint64_t> sizes(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) sizes[i] = ds.data_size(i);
    auto ids = f.ids_file.empty() ? ds.ids() : read_uuid_list(f.ids_file);
    if (!f.ids_file.empty()) {
      std::unordered_map<SampleId, std::uint64_t, SampleIdHash> by_id;
      for (std::size_t i = 0; i < ds.size(); ++i) by_id.emplace(ds.ids()[i], sizes[i]);
      sizes.clear();
      for (const auto& id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw InvalidInput(id.str() + " is not in the synthetic dataset");
        sizes.push_back(it->second);
      }
    }
    finish_run(train ? simulate_trainsim(o, *train, ids, sizes) : simulate_tightloop(o, ids, sizes), f.out);
    return 0;
  }
  Embedded emb;
  if (f.embedded) {
    emb = start_embedded(f.synth.spec(), o.table);
    o.endpoints = {emb.server->endpoint()};
  }
  if (o.endpoints.empty()) throw InvalidInput("--endpoint or --embedded is required");
  const auto ids = load_ids(f, o, emb.ds.get());
  spdlog::info("{} over {} ids, profile {}, dilation {}", train ? "trainsim" : "tightloop", ids.size(),
               o.profile.name, o.time_dilation);
  auto m = train ? run_trainsim(o, *train, ids) : run_tightloop(o, ids);
  finish_run(m, f.out);
  return 0;
}

int cmd_serve(const std::string& bind, std::size_t max_inflight, std::size_t workers, const std::string& snapshot,
              const std::string& netprofile) {
  auto backend = std::make_shared<MemoryBackend>();
  if (!snapshot.empty() && fs::exists(snapshot)) {
    backend->load_snapshot(snapshot);
    spdlog::info("loaded snapshot {}", snapshot);
  }
  ServerConfig cfg;
  cfg.bind = bind;
  cfg.max_inflight = max_inflight;
  cfg.workers = workers;
  if (!netprofile.empty()) cfg.netprofile = netsim::NetProfile::resolve(netprofile);
  Server server(backend, cfg);
  std::cout << "listening on " << server.endpoint() << std::endl;
  while (!g_interrupt.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  if (!snapshot.empty()) {
    backend->save_snapshot(snapshot);
    spdlog::info("saved snapshot {}", snapshot);
  }
  return 0;
}

std::shared_ptr<StoreClient> connect_one(const std::string& endpoint, std::size_t connections) {
  if (endpoint.empty()) throw InvalidInput("--endpoint is required");
  ClientConfig cc;
  cc.endpoints = {endpoint};
  cc.io_workers = 1;
  cc.connections_per_worker = connections;
  return StoreClient::connect(cc);
}

// Writes a synthetic dataset as one file per sample plus metadata.csv.
int cmd_synth(const SynthFlags& flags, const std::string& out) {
  if (out.empty()) throw InvalidInput("--out is required");
  const SyntheticDataset ds(flags.spec());
  fs::create_directories(out);
  std::ofstream meta(fs::path(out) / "metadata.csv");
  meta << "filename,entity_id,group_key,x,y,class_label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto name = fmt::format("sample_{:06d}.bin", i);
    const auto data = ds.data(i);
    std::ofstream f(fs::path(out) / name, std::ios::binary);
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    const auto m = ds.metadata(i);
    meta << fmt::format("{},{},{},{},{},{}\n", name, m.entity_id, m.group_key, m.coord_x, m.coord_y, m.class_label);
  }
  std::cout << fmt::format("wrote {} samples ({:.1f} MB) to {}\n", ds.size(),
                           static_cast<double>(ds.total_bytes()) / 1e6, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network data loader: store, ingestion, splits and benchmarks"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the blob store server");
  std::string bind = "127.0.0.1:7411";
  std::size_t max_inflight = 1024;
  std::size_t workers = 2;
  std::string snapshot, netprofile;
  serve->add_option("--bind", bind, "Listen address")->capture_default_str();
  serve->add_option("--max-inflight", max_inflight, "Per-connection request cap")->capture_default_str();
  serve->add_option("--workers", workers, "Write worker threads")->capture_default_str();
  serve->add_option("--snapshot-path", snapshot, "Loaded at start if present, written on shutdown");
  serve->add_option("--netprofile", netprofile, "Shape responses server-side (preset or file)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Insert a directory or a synthetic dataset");
  std::string ingest_endpoint, ingest_dir;
  bool ingest_synthetic_flag = false;
  IngestOptions iopts;
  SynthFlags ingest_synth;
  ingest->add_option("--endpoint", ingest_endpoint, "host:port of the store")->required();
  ingest->add_option("--dir", ingest_dir, "Directory with samples and metadata.csv");
  ingest->add_flag("--synthetic", ingest_synthetic_flag, "Generate the samples instead");
  ingest->add_option("--parallelism", iopts.parallelism, "Concurrent inserts")->capture_default_str();
  ingest->add_option("--data-table", iopts.data_table)->capture_default_str();
  ingest->add_option("--meta-table", iopts.meta_table)->capture_default_str();
  ingest->add_option("--id-namespace", iopts.id_namespace, "Seed of file-name-derived ids")->capture_default_str();
  ingest_synth.add(ingest);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset directory");
  SynthFlags synth_flags;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth_flags.add(synth);

  // split
  auto* split = app.add_subcommand("split", "Create entity-disjoint splits from stored metadata");
  std::string split_endpoint, split_spec, split_out, split_meta = "samples_meta";
  split->add_option("--endpoint", split_endpoint, "host:port of the store")->required();
  split->add_option("--spec", split_spec, "Split spec file (key=value)")->required();
  split->add_option("--out", split_out, "Output directory")->required();
  split->add_option("--meta-table", split_meta)->capture_default_str();

  // tightloop / trainsim
  auto* tight = app.add_subcommand("tightloop", "Read every batch as fast as possible");
  RunFlags tight_flags;
  tight_flags.add(tight);
  auto* trains = app.add_subcommand("trainsim", "Rate-limited consumers standing in for accelerators");
  RunFlags train_flags;
  TrainSimOptions train;
  train_flags.batch_size = 64;
  train_flags.add(trains);
  trains->add_option("--consumers", train.consumers, "Simulated consumers")->capture_default_str();
  trains->add_option("--rate", train.per_consumer_rate, "Items/s per consumer (0 = unlimited)")
      ->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Summarize a run directory; --check gates on thresholds");
  std::string report_dir, baseline_dir;
  bool check = false;
  CheckThresholds th;
  report->add_option("--out", report_dir, "Run directory")->required();
  report->add_flag("--check", check, "Exit 2 when a threshold is violated");
  report->add_option("--baseline", baseline_dir, "Second run directory for the gain/cv checks");
  report->add_option("--min-throughput", th.min_bytes_per_s, "Bytes/s");
  report->add_option("--max-wait-spread", th.max_wait_spread, "Post-transient max/median batch wait");
  report->add_option("--max-transient-ratio", th.max_transient_ratio, "Issued/consumed prefix bound");
  report->add_option("--min-utilization", th.min_utilization, "Trainsim achieved/target");
  report->add_option("--min-gain", th.min_gain, "Throughput over the baseline's");
  report->add_option("--max-cv-ratio", th.max_cv_ratio, "Throughput cv over the baseline's");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  install_signals();

  try {
    if (*serve) return cmd_serve(bind, max_inflight, workers, snapshot, netprofile);
    if (*ingest) {
      if (ingest_dir.empty() == !ingest_synthetic_flag) throw InvalidInput("give exactly one of --dir, --synthetic");
      auto client = connect_one(ingest_endpoint, 4);
      IngestReport rep;
      if (ingest_synthetic_flag) {
        const SyntheticDataset ds(ingest_synth.spec());
        rep = ingest_synthetic(*client, iopts, ds);
      } else {
        rep = ingest_directory(*client, iopts, ingest_dir);
      }
      std::cout << rep.to_text();
      return 0;
    }
    if (*synth) return cmd_synth(synth_flags, synth_out);
    if (*split) {
      const auto spec = SplitSpec::load(split_spec);
      auto client = connect_one(split_endpoint, 4);
      const auto meta = fetch_metadata(*client, split_meta);
      const auto result = create_splits(meta, spec);
      const auto audit = audit_split(result, meta, spec);
      const auto files = write_split_files(result, audit, split_out);
      for (std::size_t s = 0; s < files.size(); ++s) {
        std::cout << fmt::format("{}  {} ids\n", files[s], result.splits[s].size());
      }
      for (const auto& w : result.warnings) spdlog::warn("{}", w);
      std::cout << fmt::format("violations={} dropped={}\n", audit.violations.size(), result.dropped.size());
      return audit.violations.empty() ? 0 : 1;
    }
    if (*tight) return run_experiment(tight_flags, nullptr);
    if (*trains) return run_experiment(train_flags, &train);
    if (*report) {
      const auto run = read_run(report_dir);
      std::cout << format_report(run);
      if (!check) return 0;
      std::optional<RunMetrics> base;
      if (!baseline_dir.empty()) base = read_run(baseline_dir);
      const auto outcome = check_run(run, th, base ? &*base : nullptr);
      for (const auto& l : outcome.lines) std::cout << l << '\n';
      return outcome.pass ? 0 : 2;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
