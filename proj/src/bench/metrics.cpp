#include "ooload/bench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

#include "ooload/core/error.hpp"
#include "ooload/core/stats.hpp"

namespace ooload {

std::uint64_t RunMetrics::epoch_checksum(std::uint64_t epoch) const noexcept {
  std::uint64_t sum = 0;
  for (const auto& e : epochs) {
    if (e.epoch == epoch) sum += e.checksum;
  }
  return sum;
}

void rescale_time(RunMetrics& m, double factor) {
  if (factor == 1.0) return;
  for (auto& b : m.batches) {
    b.request_time /= factor;
    b.ready_time /= factor;
    b.ask_time /= factor;
    b.emit_time /= factor;
  }
  for (auto& e : m.epochs) {
    e.start /= factor;
    e.end /= factor;
  }
  m.sample_interval_s /= factor;
  m.duration /= factor;
  m.stall_time /= factor;
  m.per_consumer_rate *= factor;
  m.time_dilation *= factor;
}

std::vector<double> post_transient_waits(const RunMetrics& m, std::size_t skip) {
  std::vector<double> out;
  for (const auto& b : m.batches) {
    if (b.seq >= skip) out.push_back(b.wait_time());
  }
  return out;
}

std::vector<double> post_transient_assembly(const RunMetrics& m, std::size_t skip) {
  std::vector<double> out;
  for (const auto& b : m.batches) {
    if (b.seq >= skip) out.push_back(b.assembly_time());
  }
  return out;
}

double mean_epoch_throughput(const RunMetrics& m) {
  std::vector<double> v;
  for (const auto& e : m.epochs) v.push_back(e.bytes_per_s());
  return v.empty() ? 0.0 : stats::mean(v);
}

std::vector<double> steady_throughput_series(const RunMetrics& m, std::size_t skip) {
  // (loader, epoch) -> [start of window, last emission]
  std::map<std::pair<std::size_t, std::uint64_t>, std::pair<double, double>> windows;
  for (const auto& b : m.batches) {
    auto& w = windows.try_emplace({b.loader, b.epoch}, -1.0, 0.0).first->second;
    if (b.seq == skip) w.first = b.emit_time;
    w.second = std::max(w.second, b.emit_time);
  }
  std::vector<double> out;
  const double dt = m.sample_interval_s;
  for (std::size_t k = 0; k < m.conn_bytes.size(); ++k) {
    const double t0 = static_cast<double>(k) * dt;
    bool inside = false;
    for (const auto& [key, w] : windows) {
      if (w.first >= 0.0 && t0 >= w.first && t0 + dt <= w.second) {
        inside = true;
        break;
      }
    }
    if (!inside) continue;
    double sum = 0.0;
    for (auto b : m.conn_bytes[k]) sum += static_cast<double>(b);
    out.push_back(sum / dt);
  }
  return out;
}

double transient_ratio(const std::vector<std::pair<std::size_t, std::size_t>>& consumed_issued) {
  double worst = 0.0;
  for (const auto& [consumed, issued] : consumed_issued) {
    if (consumed == 0) continue;
    const double r = (static_cast<double>(issued) - 1.0) / static_cast<double>(consumed);
    worst = std::max(worst, r);
  }
  return worst;
}

std::map<std::string, std::string> summarize(const RunMetrics& m) {
  std::map<std::string, std::string> s;
  s["kind"] = m.kind;
  s["source"] = m.source;
  s["epochs"] = std::to_string(m.epochs.size());
  s["batches"] = std::to_string(m.batches.size());
  s["mean_epoch_bytes_per_s"] = fmt::format("{:.6g}", mean_epoch_throughput(m));
  const auto waits = post_transient_waits(m);
  if (!waits.empty()) {
    s["post_transient_wait_median_s"] = fmt::format("{:.6g}", stats::median(waits));
    s["post_transient_wait_max_s"] = fmt::format("{:.6g}", stats::max(waits));
  }
  const auto asm_times = post_transient_assembly(m);
  if (!asm_times.empty()) {
    s["post_transient_assembly_median_s"] = fmt::format("{:.6g}", stats::median(asm_times));
    s["post_transient_assembly_max_s"] = fmt::format("{:.6g}", stats::max(asm_times));
  }
  const auto series = steady_throughput_series(m);
  if (series.size() >= 2) s["steady_throughput_cv"] = fmt::format("{:.6g}", stats::cv(series));
  s["transient_request_ratio"] = fmt::format("{:.6g}", m.transient_request_ratio);
  s["requests"] = std::to_string(m.requests);
  s["speculative_requests"] = std::to_string(m.speculative_requests);
  s["time_dilation"] = fmt::format("{:.6g}", m.time_dilation);
  bool partial = false;
  for (const auto& e : m.epochs) partial = partial || e.partial;
  s["partial"] = partial ? "1" : "0";
  if (m.kind == "trainsim") {
    s["consumers"] = std::to_string(m.consumers);
    s["per_consumer_rate"] = fmt::format("{:.6g}", m.per_consumer_rate);
    s["duration_s"] = fmt::format("{:.6g}", m.duration);
    s["items_total"] = std::to_string(m.items_total);
    s["achieved_items_per_s"] = fmt::format("{:.6g}", m.achieved_items_per_s());
    s["target_items_per_s"] = fmt::format("{:.6g}", m.per_consumer_rate * static_cast<double>(m.consumers));
    s["stall_fraction"] = fmt::format("{:.6g}", m.stall_fraction());
  }
  return s;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw InvalidInput("cannot read " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (!line.empty()) rows.push_back(split_csv(line));
  }
  return rows;
}

double to_d(const std::string& s) { return std::stod(s); }
std::uint64_t to_u(const std::string& s) { return std::stoull(s); }

}  // namespace

void write_run(const RunMetrics& m, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  {
    auto out = fmt::output_file((root / "metrics.csv").string());
    out.print("loader,epoch,start_s,end_s,duration_s,bytes,items,bytes_per_s,items_per_s,checksum,partial\n");
    for (const auto& e : m.epochs) {
      out.print("{},{},{:.9f},{:.9f},{:.9f},{},{},{:.6f},{:.6f},{},{}\n", e.loader, e.epoch, e.start, e.end,
                e.duration(), e.bytes, e.items, e.bytes_per_s(), e.items_per_s(), e.checksum, e.partial ? 1 : 0);
    }
  }
  {
    auto out = fmt::output_file((root / "batch_times.csv").string());
    out.print("loader,epoch,seq,items,bytes,request_s,ready_s,ask_s,emit_s,assembly_s,wait_s\n");
    for (const auto& b : m.batches) {
      out.print("{},{},{},{},{},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f}\n", b.loader, b.epoch, b.seq, b.items,
                b.bytes, b.request_time, b.ready_time, b.ask_time, b.emit_time, b.assembly_time(), b.wait_time());
    }
  }
  {
    auto out = fmt::output_file((root / "conn_throughput.csv").string());
    out.print("interval,time_s,conn,bytes,bytes_per_s\n");
    for (std::size_t k = 0; k < m.conn_bytes.size(); ++k) {
      for (std::size_t c = 0; c < m.conn_bytes[k].size(); ++c) {
        out.print("{},{:.6f},{},{},{:.3f}\n", k, static_cast<double>(k) * m.sample_interval_s, c,
                  m.conn_bytes[k][c], static_cast<double>(m.conn_bytes[k][c]) / m.sample_interval_s);
      }
    }
  }
  {
    auto out = fmt::output_file((root / "summary.txt").string());
    for (const auto& [k, v] : summarize(m)) out.print("{}={}\n", k, v);
    out.print("sample_interval_s={:.9g}\n", m.sample_interval_s);
  }
}

RunMetrics read_run(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  RunMetrics m;
  {
    std::ifstream in(root / "summary.txt");
    if (!in) throw InvalidInput("no summary.txt in " + dir);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const auto key = line.substr(0, eq);
      const auto val = line.substr(eq + 1);
      if (key == "kind") m.kind = val;
      else if (key == "source") m.source = val;
      else if (key == "sample_interval_s") m.sample_interval_s = to_d(val);
      else if (key == "transient_request_ratio") m.transient_request_ratio = to_d(val);
      else if (key == "requests") m.requests = to_u(val);
      else if (key == "speculative_requests") m.speculative_requests = to_u(val);
      else if (key == "time_dilation") m.time_dilation = to_d(val);
      else if (key == "consumers") m.consumers = to_u(val);
      else if (key == "per_consumer_rate") m.per_consumer_rate = to_d(val);
      else if (key == "duration_s") m.duration = to_d(val);
      else if (key == "items_total") m.items_total = to_u(val);
      else if (key == "stall_fraction") m.stall_time = to_d(val);  // scaled below
    }
  }
  m.stall_time *= m.duration * static_cast<double>(m.consumers);
  for (const auto& r : read_csv(root / "metrics.csv")) {
    if (r.size() < 11) throw DecodeError("short row in metrics.csv");
    EpochMetrics e;
    e.loader = to_u(r[0]);
    e.epoch = to_u(r[1]);
    e.start = to_d(r[2]);
    e.end = to_d(r[3]);
    e.bytes = to_u(r[5]);
    e.items = to_u(r[6]);
    e.checksum = to_u(r[9]);
    e.partial = r[10] == "1";
    m.epochs.push_back(e);
  }
  for (const auto& r : read_csv(root / "batch_times.csv")) {
    if (r.size() < 9) throw DecodeError("short row in batch_times.csv");
    BatchRecord b;
    b.loader = to_u(r[0]);
    b.epoch = to_u(r[1]);
    b.seq = to_u(r[2]);
    b.items = to_u(r[3]);
    b.bytes = to_u(r[4]);
    b.request_time = to_d(r[5]);
    b.ready_time = to_d(r[6]);
    b.ask_time = to_d(r[7]);
    b.emit_time = to_d(r[8]);
    m.batches.push_back(b);
  }
  for (const auto& r : read_csv(root / "conn_throughput.csv")) {
    if (r.size() < 4) throw DecodeError("short row in conn_throughput.csv");
    const auto k = to_u(r[0]);
    const auto c = to_u(r[2]);
    if (m.conn_bytes.size() <= k) m.conn_bytes.resize(k + 1);
    if (m.conn_bytes[k].size() <= c) m.conn_bytes[k].resize(c + 1, 0);
    m.conn_bytes[k][c] = to_u(r[3]);
  }
  return m;
}

}  // namespace ooload
