#include "ooload/loader/loader_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <queue>

#include "ooload/client/dispatch.hpp"
#include "ooload/client/speculation.hpp"
#include "ooload/core/epoch_plan.hpp"
#include "ooload/core/error.hpp"
#include "ooload/loader/fill_schedule.hpp"
#include "ooload/netsim/oracle.hpp"

namespace ooload::sim {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

enum class EventKind : std::uint8_t { Arrival, Ask };

struct Event {
  double time;
  std::uint64_t order;
  EventKind kind;
  std::size_t ref;
  bool operator>(const Event& o) const noexcept {
    return time != o.time ? time > o.time : order > o.order;
  }
};

struct Request {
  std::size_t loader;
  std::uint64_t epoch;
  std::size_t seq;
  std::size_t pos;
  std::uint64_t bytes;
  std::size_t conn = kNone;
  double issue_time = 0.0;
  bool speculative = false;
  bool hedged = false;
};

struct PoolEntry {
  std::size_t seq;
  std::size_t pos;
  double arrived;
};

struct EpochState {
  EpochPlan plan;
  std::vector<std::vector<std::uint64_t>> bytes;    // response frame
  std::vector<std::vector<std::uint64_t>> payload;  // reported
  std::vector<std::vector<std::uint8_t>> delivered;
  std::vector<std::size_t> arrived;
  std::vector<double> first_request;
  std::vector<double> complete_time;
  std::deque<PoolEntry> pool;
  std::size_t requested = 0;
  std::size_t consumed = 0;
  bool started = false;
  double start = 0.0;
  std::uint64_t emitted_bytes = 0;
  std::size_t emitted_items = 0;

  bool draining() const noexcept { return requested == plan.num_batches(); }
};

struct Connection {
  netsim::OracleLink up;
  netsim::OracleLink down;
  std::size_t outstanding = 0;
  std::deque<std::size_t> inflight;
  LinkEstimator estimator;
};

struct LoaderState {
  std::unordered_map<SampleId, std::pair<std::uint64_t, std::uint64_t>, SampleIdHash> sizes;  // response, payload
  std::vector<SampleId> ids;
  std::map<std::uint64_t, std::unique_ptr<EpochState>> epochs;
  std::uint64_t current = 0;
  std::uint64_t last_epoch = 0;
  std::size_t total_consumed = 0;
  bool waiting = false;
  bool finished = false;
  double ask_time = 0.0;
};

class Simulator {
 public:
  Simulator(const std::vector<SimShard>& shards, const LoaderSimConfig& cfg)
      : cfg_(cfg),
        fill_(cfg.prefetch.prefetch_buffers, cfg.prefetch.incremental_fill,
              cfg.prefetch.fill_stride) {
    cfg_.prefetch.validate();
    cfg_.profile.validate();
    if (cfg_.num_connections == 0) throw InvalidSpec("need at least one connection");
    if (cfg_.epochs == 0) throw InvalidSpec("need at least one epoch");
    conns_.resize(cfg_.num_connections);
    for (std::size_t c = 0; c < conns_.size(); ++c) {
      conns_[c].up = netsim::make_oracle_link(cfg_.profile, c, conns_.size(), netsim::Direction::Uplink);
      conns_[c].down =
          netsim::make_oracle_link(cfg_.profile, c, conns_.size(), netsim::Direction::Downlink);
    }
    loaders_.resize(shards.size());
    for (std::size_t l = 0; l < shards.size(); ++l) {
      const auto& s = shards[l];
      if (s.ids.size() != s.response_bytes.size() ||
          (!s.payload_bytes.empty() && s.payload_bytes.size() != s.ids.size())) {
        throw InvalidInput("shard ids/bytes length mismatch");
      }
      auto& L = loaders_[l];
      L.ids = s.ids;
      L.sizes.reserve(s.ids.size());
      for (std::size_t i = 0; i < s.ids.size(); ++i) {
        const auto payload = s.payload_bytes.empty() ? s.response_bytes[i] : s.payload_bytes[i];
        L.sizes.emplace(s.ids[i], std::make_pair(s.response_bytes[i], payload));
      }
      L.current = cfg_.first_epoch;
      L.last_epoch = cfg_.first_epoch + cfg_.epochs - 1;
    }
    result_.sample_interval_s = cfg_.sample_interval_s;
  }

  SimResult run() {
    for (std::size_t l = 0; l < loaders_.size(); ++l) push(0.0, EventKind::Ask, l);
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      if (ev.kind == EventKind::Arrival) {
        on_arrival(ev.ref);
      } else {
        on_ask(ev.ref);
      }
    }
    // Late duplicate responses can arrive after the last emission; they do not
    // extend the run.
    result_.end_time = last_emit_;
    return std::move(result_);
  }

 private:
  void push(double t, EventKind kind, std::size_t ref) { events_.push({t, order_++, kind, ref}); }

  EpochState& ensure_epoch(std::size_t l, std::uint64_t e) {
    auto& L = loaders_[l];
    auto it = L.epochs.find(e);
    if (it != L.epochs.end()) return *it->second;
    auto st = std::make_unique<EpochState>();
    st->plan = make_epoch_plan(L.ids, cfg_.prefetch.batch_size, cfg_.prefetch.seed, e,
                               cfg_.prefetch.drop_last);
    const auto nb = st->plan.num_batches();
    st->bytes.resize(nb);
    st->payload.resize(nb);
    st->delivered.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& batch = st->plan.batches[b];
      st->delivered[b].assign(batch.size(), 0);
      st->bytes[b].reserve(batch.size());
      st->payload[b].reserve(batch.size());
      for (const auto& id : batch) {
        const auto& [response, payload] = L.sizes.at(id);
        st->bytes[b].push_back(response);
        st->payload[b].push_back(payload);
      }
    }
    st->arrived.assign(nb, 0);
    st->first_request.assign(nb, 0.0);
    st->complete_time.assign(nb, 0.0);
    auto& ref = *st;
    L.epochs.emplace(e, std::move(st));
    return ref;
  }

  void dispatch(std::size_t r, std::size_t c) {
    auto& req = requests_[r];
    auto& conn = conns_[c];
    req.conn = c;
    req.issue_time = now_;
    ++conn.outstanding;
    conn.inflight.push_back(r);
    result_.max_inflight_seen = std::max(result_.max_inflight_seen, conn.outstanding);
    const double at_server = conn.up.transmit(now_, cfg_.request_bytes);
    const double delivered = conn.down.transmit(at_server + cfg_.server_service_time_s, req.bytes);
    push(delivered, EventKind::Arrival, r);
  }

  std::vector<std::size_t> outstanding_counts() const {
    std::vector<std::size_t> counts(conns_.size());
    for (std::size_t c = 0; c < conns_.size(); ++c) counts[c] = conns_[c].outstanding;
    return counts;
  }

  void submit(std::size_t r) {
    if (!overflow_.empty()) {
      overflow_.push_back(r);
      return;
    }
    const auto counts = outstanding_counts();
    const auto c = pick_least_loaded(std::span<const std::size_t>(counts), cfg_.max_inflight, cursor_);
    if (c == kNoConnection) {
      overflow_.push_back(r);
      return;
    }
    cursor_ = (c + 1) % conns_.size();
    dispatch(r, c);
  }

  void request_batch(std::size_t l, std::uint64_t e, EpochState& st) {
    const std::size_t seq = st.requested++;
    st.first_request[seq] = now_;
    for (std::size_t p = 0; p < st.plan.batches[seq].size(); ++p) {
      requests_.push_back(Request{l, e, seq, p, st.bytes[seq][p]});
      ++result_.requests;
      submit(requests_.size() - 1);
    }
    if (st.draining() && cfg_.prefetch.speculative_drain) speculate();
  }

  void top_up(std::size_t l) {
    auto& L = loaders_[l];
    auto& cur = ensure_epoch(l, L.current);
    const bool carry = cfg_.prefetch.continue_across_epochs;
    const std::size_t target = fill_.target(carry ? L.total_consumed : cur.consumed);
    std::size_t outstanding = cur.requested - cur.consumed;
    while (outstanding < target && cur.requested < cur.plan.num_batches()) {
      request_batch(l, L.current, cur);
      ++outstanding;
    }
    if (carry && cur.draining() && L.current < L.last_epoch) {
      auto& next = ensure_epoch(l, L.current + 1);
      outstanding += next.requested;
      while (outstanding < target && next.requested < next.plan.num_batches()) {
        request_batch(l, L.current + 1, next);
        ++outstanding;
      }
    }
  }

  void on_ask(std::size_t l) {
    auto& L = loaders_[l];
    if (L.finished) return;
    auto& st = ensure_epoch(l, L.current);
    if (!st.started) {
      st.started = true;
      st.start = now_;
      top_up(l);
    }
    L.waiting = true;
    L.ask_time = now_;
    try_emit(l);
  }

  void try_emit(std::size_t l) {
    auto& L = loaders_[l];
    if (!L.waiting) return;
    auto& st = *L.epochs.at(L.current);
    if (st.plan.num_batches() == 0) {
      L.waiting = false;
      result_.epochs.push_back({l, L.current, st.start, now_, 0, 0});
      L.epochs.erase(L.current);
      if (L.current == L.last_epoch) {
        L.finished = true;
        return;
      }
      ++L.current;
      push(now_, EventKind::Ask, l);
      return;
    }
    const std::size_t k = st.consumed;
    const std::size_t need = st.plan.batches[k].size();
    SimBatch out;
    out.loader = l;
    out.epoch = L.current;
    out.seq = k;
    out.items = need;
    out.request_time = st.first_request[k];
    out.ask_time = L.ask_time;
    if (cfg_.prefetch.out_of_order) {
      if (st.pool.size() < need) return;
      for (std::size_t i = 0; i < need; ++i) {
        const auto entry = st.pool.front();
        st.pool.pop_front();
        out.bytes += st.payload[entry.seq][entry.pos];
        out.ready_time = entry.arrived;
        if (cfg_.record_items) out.ids.push_back(st.plan.batches[entry.seq][entry.pos]);
      }
    } else {
      if (st.arrived[k] < need) return;
      out.ready_time = st.complete_time[k];
      for (auto b : st.payload[k]) out.bytes += b;
      if (cfg_.record_items) out.ids = st.plan.batches[k];
    }
    out.emit_time = now_;
    last_emit_ = std::max(last_emit_, now_);
    L.waiting = false;
    ++st.consumed;
    ++L.total_consumed;
    st.emitted_bytes += out.bytes;
    st.emitted_items += out.items;
    result_.batches.push_back(std::move(out));

    top_up(l);
    result_.issues.push_back(
        {l, L.current, st.consumed, st.requested, st.requested - st.consumed});

    const double work = cfg_.consumer_item_time_s * static_cast<double>(need);
    if (st.consumed == st.plan.num_batches()) {
      result_.epochs.push_back({l, L.current, st.start, now_, st.emitted_bytes, st.emitted_items});
      L.epochs.erase(L.current);
      if (L.current == L.last_epoch) {
        L.finished = true;
        return;
      }
      ++L.current;
    }
    push(now_ + work, EventKind::Ask, l);
  }

  void record_delivery(std::size_t c, std::uint64_t bytes) {
    const auto k = static_cast<std::size_t>(std::floor(now_ / cfg_.sample_interval_s));
    while (result_.conn_bytes.size() <= k) result_.conn_bytes.emplace_back(conns_.size(), 0);
    result_.conn_bytes[k][c] += bytes;
  }

  void on_arrival(std::size_t r) {
    const Request req = requests_[r];
    auto& conn = conns_[req.conn];
    --conn.outstanding;
    if (!conn.inflight.empty() && conn.inflight.front() == r) {
      conn.inflight.pop_front();
    } else {
      conn.inflight.erase(std::find(conn.inflight.begin(), conn.inflight.end(), r));
    }
    conn.estimator.on_response(now_, req.issue_time, req.bytes);
    record_delivery(req.conn, req.bytes);
    while (!overflow_.empty() && conn.outstanding < cfg_.max_inflight) {
      const auto next = overflow_.front();
      overflow_.pop_front();
      dispatch(next, req.conn);
    }

    auto& L = loaders_[req.loader];
    auto it = L.epochs.find(req.epoch);
    if (it == L.epochs.end() || it->second->delivered[req.seq][req.pos]) {
      ++result_.duplicate_responses;
    } else {
      auto& st = *it->second;
      st.delivered[req.seq][req.pos] = 1;
      if (cfg_.prefetch.out_of_order) {
        st.pool.push_back({req.seq, req.pos, now_});
      } else if (++st.arrived[req.seq] == st.plan.batches[req.seq].size()) {
        st.complete_time[req.seq] = now_;
      }
      if (req.epoch == L.current) try_emit(req.loader);
    }
    if (cfg_.prefetch.speculative_drain) speculate();
  }

  bool hedgeable(std::size_t r) const {
    const auto& req = requests_[r];
    if (req.speculative || req.hedged) return false;
    const auto& L = loaders_[req.loader];
    auto it = L.epochs.find(req.epoch);
    if (it == L.epochs.end()) return false;
    const auto& st = *it->second;
    return st.draining() && !st.delivered[req.seq][req.pos];
  }

  bool any_draining() const {
    for (const auto& L : loaders_) {
      for (const auto& [e, st] : L.epochs) {
        if (st->draining() && st->emitted_items < st->plan.num_items()) return true;
      }
    }
    return false;
  }

  void speculate() {
    if (!overflow_.empty() || !any_draining()) return;
    std::vector<SpecConn> view(conns_.size());
    std::vector<std::vector<std::size_t>> refs(conns_.size());
    for (std::size_t c = 0; c < conns_.size(); ++c) {
      view[c].estimator = &conns_[c].estimator;
      view[c].items.reserve(conns_[c].inflight.size());
      for (auto r : conns_[c].inflight) {
        view[c].items.push_back({requests_[r].bytes, requests_[r].issue_time, hedgeable(r)});
        refs[c].push_back(r);
      }
    }
    for (const auto& m : plan_speculation(view, now_, cfg_.max_inflight)) {
      const auto victim = refs[m.from_conn][m.item];
      requests_[victim].hedged = true;
      Request dup = requests_[victim];
      dup.speculative = true;
      dup.hedged = false;
      requests_.push_back(dup);
      ++result_.requests;
      ++result_.speculative_requests;
      dispatch(requests_.size() - 1, m.to_conn);
    }
  }

  LoaderSimConfig cfg_;
  FillSchedule fill_;
  std::vector<Connection> conns_;
  std::vector<LoaderState> loaders_;
  std::vector<Request> requests_;
  std::deque<std::size_t> overflow_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t order_ = 0;
  std::size_t cursor_ = 0;
  double now_ = 0.0;
  double last_emit_ = 0.0;
  SimResult result_;
};

}  // namespace

SimResult simulate_loaders(const std::vector<SimShard>& shards, const LoaderSimConfig& config) {
  return Simulator(shards, config).run();
}

std::vector<double> aggregate_series(const SimResult& r) {
  std::vector<double> out;
  out.reserve(r.conn_bytes.size());
  for (const auto& row : r.conn_bytes) {
    double s = 0.0;
    for (auto b : row) s += static_cast<double>(b);
    out.push_back(s / r.sample_interval_s);
  }
  return out;
}

}  // namespace ooload::sim
