#include "ooload/client/client.hpp"

#include <sys/epoll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <sys/timerfd.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "ooload/client/dispatch.hpp"
#include "ooload/client/link_estimator.hpp"
#include "ooload/client/speculation.hpp"
#include "ooload/core/error.hpp"
#include "ooload/netsim/shaper.hpp"
#include "ooload/store/net.hpp"

namespace ooload {

void ClientConfig::validate() const {
  if (endpoints.empty()) throw InvalidSpec("client needs at least one endpoint");
  if (io_workers == 0) throw InvalidSpec("io_workers must be >= 1");
  if (connections_per_worker == 0) throw InvalidSpec("connections_per_worker must be >= 1");
  if (max_inflight_per_connection == 0) throw InvalidSpec("max_inflight_per_connection must be >= 1");
  if (request_timeout.count() <= 0) throw InvalidSpec("request_timeout must be positive");
  if (netprofile) netprofile->validate();
}

[[noreturn]] void rethrow_remote_error(wire::Status status, std::span<const std::uint8_t> payload) {
  auto [kind, message] = wire::decode_error(payload);
  if (kind == "DuplicateKey") throw DuplicateKey(message);
  if (kind == "InvalidInput") throw InvalidInput(message);
  if (kind == "InvalidSpec") throw InvalidSpec(message);
  if (kind == "NotFound" || status == wire::Status::NotFound) throw NotFound(message);
  if (kind == "DecodeError" || kind == "FrameTooLarge") throw DecodeError(message);
  if (kind == "StateError") throw StateError(message);
  throw ServerError(kind.empty() ? message : kind + ": " + message);
}

namespace {

using netsim::Clock;

constexpr std::size_t kReadChunk = 256 * 1024;
constexpr std::size_t kDeadLoad = std::numeric_limits<std::size_t>::max() / 2;
constexpr std::uint64_t kEventTag = 0;
constexpr std::uint64_t kTimerTag = 1;
constexpr std::uint64_t kFirstConnTag = 2;
constexpr auto kTimeoutScan = std::chrono::milliseconds(50);

struct Call {
  wire::Opcode op = wire::Opcode::Ping;
  std::string table;
  Blob payload;
  std::shared_ptr<ReplyTarget> target;
  std::size_t index = 0;
  std::size_t retries_left = 0;
  std::size_t avoid = kNoConnection;
  bool speculative = false;
  bool hedged = false;
  double issued_at = 0.0;
  double deadline = 0.0;
};

struct Conn {
  std::size_t index = 0;
  std::size_t worker = 0;
  net::Fd fd;
  std::atomic<bool> alive{true};

  std::mutex mu;
  std::unordered_map<std::uint64_t, Call> inflight;
  std::deque<std::uint64_t> order;  // issue order, may hold finished ids
  Blob wbuf;
  std::size_t woff = 0;
  bool shaped = false;
  netsim::ShapedConnection shape;
  netsim::TimedQueue<Blob> out_delay;
  LinkEstimator estimator;

  // I/O thread only.
  wire::FrameReader reader;
  netsim::TimedQueue<Blob> in_delay;
  bool want_write = false;

  std::atomic<std::uint64_t> bytes_in{0};
  std::atomic<std::uint64_t> arrivals{0};

  explicit Conn(std::size_t max_frame) : reader(max_frame) {}

  void drop_finished_front() {
    while (!order.empty() && inflight.find(order.front()) == inflight.end()) order.pop_front();
  }
};

struct Worker {
  net::Fd epoll;
  net::Fd event;
  net::Fd timer;
  std::vector<Conn*> conns;
  std::atomic<bool> signaled{false};
  std::thread thread;
};

class PromiseTarget final : public ReplyTarget {
 public:
  explicit PromiseTarget(wire::Opcode op) : op_(op) {}
  std::future<wire::WireResponse> future() { return promise_.get_future(); }

  void on_reply(std::size_t, const Reply& r) override {
    if (r.outcome != Reply::Outcome::Response) {
      promise_.set_exception(std::make_exception_ptr(
          ConnectError(r.outcome == Reply::Outcome::Timeout ? std::string("request timed out")
                                                            : std::string("connection lost"))));
      return;
    }
    wire::WireResponse resp;
    resp.status = r.status;
    resp.payload.assign(r.payload.begin(), r.payload.end());
    promise_.set_value(std::move(resp));
  }

 private:
  wire::Opcode op_;
  std::promise<wire::WireResponse> promise_;
};

}  // namespace

class StoreClient::Impl {
 public:
  explicit Impl(ClientConfig cfg)
      : cfg_(std::move(cfg)),
        origin_(Clock::now()),
        copy_pool_(cfg_.copy_threads == 0 ? default_pool_size() : cfg_.copy_threads) {}

  ~Impl() { shutdown(); }

  void open() {
    std::vector<net::HostPort> eps;
    for (const auto& e : cfg_.endpoints) eps.push_back(net::parse_host_port(e));
    const std::size_t total = cfg_.total_connections();
    workers_.resize(cfg_.io_workers);
    for (auto& w : workers_) {
      w = std::make_unique<Worker>();
      w->epoll.reset(epoll_create1(EPOLL_CLOEXEC));
      w->event.reset(eventfd(0, EFD_NONBLOCK | EFD_CLOEXEC));
      w->timer.reset(timerfd_create(CLOCK_MONOTONIC, TFD_NONBLOCK | TFD_CLOEXEC));
      if (!w->epoll || !w->event || !w->timer) throw ConnectError("cannot create client event descriptors");
      add(*w, w->event.get(), kEventTag, EPOLLIN);
      add(*w, w->timer.get(), kTimerTag, EPOLLIN);
    }
    std::string last_error;
    for (std::size_t i = 0; i < total; ++i) {
      const auto& ep = eps[i % eps.size()];
      int fd = -1;
      try {
        fd = net::connect_tcp(ep, static_cast<int>(cfg_.connect_timeout.count()));
      } catch (const ConnectError& e) {
        last_error = e.what();
        spdlog::warn("connection {} to {} failed: {}", i, ep.str(), e.what());
        continue;
      }
      auto c = std::make_unique<Conn>(cfg_.max_frame);
      c->index = conns_.size();
      c->worker = i / cfg_.connections_per_worker;
      c->fd.reset(fd);
      if (cfg_.netprofile && !cfg_.netprofile->is_identity()) {
        c->shaped = true;
        c->shape = netsim::wrap_connection(*cfg_.netprofile, i, total, /*client_side=*/true, origin_);
      }
      conns_.push_back(std::move(c));
    }
    if (conns_.empty()) throw ConnectError("no endpoint reachable: " + last_error);
    degraded_ = conns_.size() < total;
    if (degraded_) spdlog::warn("client degraded: {} of {} connections open", conns_.size(), total);
    load_ = std::make_unique<std::atomic<std::size_t>[]>(conns_.size());
    for (std::size_t c = 0; c < conns_.size(); ++c) load_[c] = 0;
    alive_count_ = conns_.size();
    for (auto& c : conns_) {
      auto& w = *workers_[c->worker];
      w.conns.push_back(c.get());
      add(w, c->fd.get(), kFirstConnTag + c->index, EPOLLIN | EPOLLRDHUP);
    }
    for (auto& w : workers_) {
      Worker* wp = w.get();
      wp->thread = std::thread([this, wp] { run(*wp); });
    }
  }

  void shutdown() {
    if (stopping_.exchange(true)) return;
    for (auto& w : workers_) {
      if (w) signal(*w);
    }
    for (auto& w : workers_) {
      if (w && w->thread.joinable()) w->thread.join();
    }
  }

  double now() const noexcept {
    return std::chrono::duration<double>(Clock::now() - origin_).count();
  }

  void submit(Call call) {
    std::lock_guard lock(ov_mu_);
    submit_locked(std::move(call));
  }

  void submit_many(std::vector<Call> calls) {
    std::lock_guard lock(ov_mu_);
    for (auto& c : calls) submit_locked(std::move(c));
  }

  std::size_t speculate(double ratio) {
    std::lock_guard lock(ov_mu_);
    if (!overflow_.empty()) return 0;
    const double t = now();
    const auto mean = static_cast<std::uint64_t>(mean_response_bytes());
    const std::size_t n = conns_.size();
    std::vector<LinkEstimator> est(n);
    std::vector<SpecConn> view(n);
    std::vector<std::vector<std::uint64_t>> ids(n);
    bool any = false;
    for (std::size_t c = 0; c < n; ++c) {
      auto& conn = *conns_[c];
      if (!conn.alive) continue;
      std::lock_guard cl(conn.mu);
      est[c] = conn.estimator;
      view[c].estimator = &est[c];
      view[c].items.reserve(conn.inflight.size());
      for (auto id : conn.order) {
        auto it = conn.inflight.find(id);
        if (it == conn.inflight.end()) continue;
        const auto& call = it->second;
        const bool h = !call.speculative && !call.hedged && call.target && call.target->hedgeable(call.index);
        any = any || h;
        view[c].items.push_back({mean, call.issued_at, h});
        ids[c].push_back(id);
      }
    }
    if (!any) return 0;
    std::size_t sent = 0;
    for (const auto& m : plan_speculation(view, t, cfg_.max_inflight_per_connection, ratio)) {
      auto& from = *conns_[m.from_conn];
      Call dup;
      {
        std::lock_guard cl(from.mu);
        auto it = from.inflight.find(ids[m.from_conn][m.item]);
        if (it == from.inflight.end()) continue;
        it->second.hedged = true;
        dup = it->second;
      }
      dup.speculative = true;
      dup.hedged = false;
      dup.retries_left = 0;
      if (!conns_[m.to_conn]->alive) continue;
      dispatch_locked(std::move(dup), m.to_conn);
      ++sent;
    }
    speculative_ += sent;
    return sent;
  }

  double mean_response_bytes() const noexcept {
    const auto n = get_count_.load();
    return n == 0 ? 0.0 : static_cast<double>(get_bytes_.load()) / static_cast<double>(n);
  }

  ClientCounters counters() const {
    ClientCounters out;
    out.time = now();
    out.connections.reserve(conns_.size());
    for (std::size_t c = 0; c < conns_.size(); ++c) {
      const auto load = load_[c].load();
      out.connections.push_back(
          {conns_[c]->bytes_in.load(), conns_[c]->arrivals.load(), load >= kDeadLoad ? 0 : load});
    }
    out.requests = requests_.load();
    out.speculative_requests = speculative_.load();
    out.retries = retries_.load();
    out.max_inflight_seen = max_seen_.load();
    return out;
  }

  const ClientConfig& config() const noexcept { return cfg_; }
  std::size_t num_connections() const noexcept { return conns_.size(); }
  bool degraded() const noexcept { return degraded_; }
  ThreadPool& copy_pool() noexcept { return copy_pool_; }

 private:
  void add(Worker& w, int fd, std::uint64_t tag, std::uint32_t events) {
    epoll_event ev{};
    ev.events = events;
    ev.data.u64 = tag;
    epoll_ctl(w.epoll.get(), EPOLL_CTL_ADD, fd, &ev);
  }

  void signal(Worker& w) {
    if (w.signaled.exchange(true)) return;
    const std::uint64_t one = 1;
    [[maybe_unused]] auto rc = ::write(w.event.get(), &one, sizeof one);
  }

  // ---- dispatch (ov_mu_ held) ----

  void submit_locked(Call call) {
    if (alive_count_.load() == 0) {
      fail_now(std::move(call), Reply::Outcome::ConnectionLost);
      return;
    }
    if (!overflow_.empty()) {
      overflow_.push_back(std::move(call));
      return;
    }
    const std::size_t c = pick(call.avoid);
    if (c == kNoConnection) {
      overflow_.push_back(std::move(call));
      return;
    }
    dispatch_locked(std::move(call), c);
  }

  std::size_t pick(std::size_t avoid) {
    const std::size_t n = conns_.size();
    std::span<const std::atomic<std::size_t>> loads(load_.get(), n);
    std::size_t c = kNoConnection;
    if (avoid != kNoConnection && n > 1) {
      std::vector<std::size_t> copy(n);
      for (std::size_t i = 0; i < n; ++i) copy[i] = i == avoid ? kDeadLoad : loads[i].load();
      c = pick_least_loaded(std::span<const std::size_t>(copy), cfg_.max_inflight_per_connection, cursor_);
    }
    if (c == kNoConnection) c = pick_least_loaded(loads, cfg_.max_inflight_per_connection, cursor_);
    if (c != kNoConnection) cursor_ = (c + 1) % n;
    return c;
  }

  void dispatch_locked(Call call, std::size_t c) {
    auto& conn = *conns_[c];
    const std::size_t load = ++load_[c];
    std::size_t seen = max_seen_.load();
    while (load > seen && !max_seen_.compare_exchange_weak(seen, load)) {
    }
    ++requests_;
    const std::uint64_t id = next_id_++;
    call.issued_at = now();
    call.deadline = call.issued_at + std::chrono::duration<double>(cfg_.request_timeout).count();
    {
      std::lock_guard cl(conn.mu);
      if (conn.shaped) {
        Blob frame;
        frame.reserve(wire::frame_size(call.table.size(), call.payload.size()));
        wire::append_frame_head(frame, id, static_cast<std::uint8_t>(call.op), call.table,
                                call.payload.size());
        frame.insert(frame.end(), call.payload.begin(), call.payload.end());
        const auto due = conn.shape.outbound.schedule(Clock::now(), frame.size());
        conn.out_delay.push(due, std::move(frame));
      } else {
        wire::append_frame_head(conn.wbuf, id, static_cast<std::uint8_t>(call.op), call.table,
                                call.payload.size());
        conn.wbuf.insert(conn.wbuf.end(), call.payload.begin(), call.payload.end());
      }
      conn.order.push_back(id);
      conn.inflight.emplace(id, std::move(call));
    }
    signal(*workers_[conn.worker]);
  }

  void fail_now(Call call, Reply::Outcome outcome) {
    if (call.speculative || !call.target) return;
    Reply r;
    r.outcome = outcome;
    r.status = wire::Status::ServerError;
    r.issued_at = call.issued_at;
    r.arrived_at = now();
    call.target->on_reply(call.index, r);
  }

  // Called without locks once a request has left its connection.
  void fail_or_retry(Call call, std::size_t conn, Reply::Outcome outcome) {
    if (call.speculative) return;
    if (call.retries_left > 0 && !stopping_) {
      --call.retries_left;
      call.avoid = conn;
      ++retries_;
      submit(std::move(call));
      return;
    }
    Reply r;
    r.outcome = outcome;
    r.status = wire::Status::ServerError;
    r.connection = conn;
    r.issued_at = call.issued_at;
    r.arrived_at = now();
    if (call.target) call.target->on_reply(call.index, r);
  }

  void pump_overflow(std::size_t c) {
    std::lock_guard lock(ov_mu_);
    while (!overflow_.empty() && load_[c].load() < cfg_.max_inflight_per_connection) {
      Call next = std::move(overflow_.front());
      overflow_.pop_front();
      dispatch_locked(std::move(next), c);
    }
  }

  // ---- I/O thread ----

  void run(Worker& w) {
    std::vector<epoll_event> events(64);
    auto next_scan = Clock::now() + kTimeoutScan;
    while (!stopping_) {
      const int n = epoll_wait(w.epoll.get(), events.data(), static_cast<int>(events.size()),
                               static_cast<int>(kTimeoutScan.count()));
      if (n < 0 && errno != EINTR) {
        spdlog::error("client epoll_wait: {}", std::strerror(errno));
        break;
      }
      for (int i = 0; i < n; ++i) {
        const auto tag = events[i].data.u64;
        if (tag == kEventTag) {
          std::uint64_t v;
          while (::read(w.event.get(), &v, sizeof v) > 0) {
          }
          w.signaled = false;
        } else if (tag == kTimerTag) {
          std::uint64_t v;
          while (::read(w.timer.get(), &v, sizeof v) > 0) {
          }
        } else {
          Conn& c = *conns_[tag - kFirstConnTag];
          if (!c.alive) continue;
          if (events[i].events & (EPOLLIN | EPOLLRDHUP | EPOLLHUP | EPOLLERR)) read_conn(w, c);
        }
      }
      if (stopping_) break;
      const auto t = Clock::now();
      for (Conn* c : w.conns) {
        if (!c->alive) continue;
        try {
          release_inbound(*c, t);
        } catch (const DecodeError& e) {
          spdlog::warn("connection {}: {}", c->index, e.what());
          connection_lost(w, *c);
        }
        if (c->alive) flush(w, *c, t);
      }
      if (Clock::now() >= next_scan) {
        for (Conn* c : w.conns) {
          if (c->alive) expire(*c);
        }
        next_scan = Clock::now() + kTimeoutScan;
      }
      arm_timer(w);
    }
  }

  void arm_timer(Worker& w) {
    std::optional<netsim::TimePoint> next;
    for (Conn* c : w.conns) {
      if (!c->alive || !c->shaped) continue;
      auto a = c->in_delay.next_due();
      std::optional<netsim::TimePoint> b;
      {
        std::lock_guard cl(c->mu);
        b = c->out_delay.next_due();
      }
      for (auto d : {a, b}) {
        if (d && (!next || *d < *next)) next = d;
      }
    }
    itimerspec spec{};
    if (next) {
      auto delta = std::chrono::duration_cast<std::chrono::nanoseconds>(*next - Clock::now()).count();
      if (delta < 1000) delta = 1000;
      spec.it_value.tv_sec = delta / 1'000'000'000;
      spec.it_value.tv_nsec = delta % 1'000'000'000;
    }
    timerfd_settime(w.timer.get(), 0, &spec, nullptr);
  }

  void flush(Worker& w, Conn& c, netsim::TimePoint t) {
    bool want;
    {
      std::lock_guard cl(c.mu);
      while (auto f = c.out_delay.pop_due(t)) c.wbuf.insert(c.wbuf.end(), f->begin(), f->end());
      while (c.woff < c.wbuf.size()) {
        const ssize_t n = ::send(c.fd.get(), c.wbuf.data() + c.woff, c.wbuf.size() - c.woff, MSG_NOSIGNAL);
        if (n < 0) {
          if (errno == EINTR) continue;
          if (errno == EAGAIN || errno == EWOULDBLOCK) break;
          want = false;
          goto lost;
        }
        c.woff += static_cast<std::size_t>(n);
      }
      if (c.woff == c.wbuf.size()) {
        c.wbuf.clear();
        c.woff = 0;
      } else if (c.woff > (1u << 20)) {
        c.wbuf.erase(c.wbuf.begin(), c.wbuf.begin() + static_cast<std::ptrdiff_t>(c.woff));
        c.woff = 0;
      }
      want = c.woff < c.wbuf.size();
    }
    if (want != c.want_write) {
      c.want_write = want;
      epoll_event ev{};
      ev.events = EPOLLIN | EPOLLRDHUP | (want ? EPOLLOUT : 0u);
      ev.data.u64 = kFirstConnTag + c.index;
      epoll_ctl(w.epoll.get(), EPOLL_CTL_MOD, c.fd.get(), &ev);
    }
    return;
  lost:
    connection_lost(w, c);
  }

  void read_conn(Worker& w, Conn& c) {
    auto buf = c.reader.prepare(kReadChunk);
    const ssize_t got = ::recv(c.fd.get(), buf.data(), std::min(buf.size(), kReadChunk), 0);
    if (got == 0 || (got < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)) {
      connection_lost(w, c);
      return;
    }
    if (got < 0) return;
    c.reader.commit(static_cast<std::size_t>(got));
    const auto t = Clock::now();
    try {
      while (auto frame = c.reader.next()) {
        if (c.shaped) {
          const auto due = c.shape.inbound.schedule(t, frame->size());
          c.in_delay.push(due, Blob(frame->begin(), frame->end()));
        } else {
          handle_frame(c, *frame);
        }
      }
    } catch (const DecodeError& e) {
      spdlog::warn("connection {}: {}", c.index, e.what());
      connection_lost(w, c);
    }
  }

  void release_inbound(Conn& c, netsim::TimePoint t) {
    while (auto f = c.in_delay.pop_due(t)) handle_frame(c, *f);
  }

  void handle_frame(Conn& c, std::span<const std::uint8_t> frame) {
    const auto v = wire::parse_frame(frame, cfg_.max_frame);
    const double t = now();
    c.bytes_in += frame.size();
    ++c.arrivals;
    Call call;
    {
      std::lock_guard cl(c.mu);
      auto it = c.inflight.find(v.request_id);
      if (it == c.inflight.end()) return;  // answered after its timeout
      call = std::move(it->second);
      c.inflight.erase(it);
      c.drop_finished_front();
      c.estimator.on_response(t, call.issued_at, frame.size());
    }
    --load_[c.index];
    if (call.op == wire::Opcode::Get) {
      get_bytes_ += frame.size();
      ++get_count_;
    }
    pump_overflow(c.index);
    if (!call.target) return;
    Reply r;
    r.outcome = Reply::Outcome::Response;
    r.status = wire::valid_status(v.code) ? static_cast<wire::Status>(v.code) : wire::Status::ServerError;
    r.payload = v.payload;
    r.connection = c.index;
    r.issued_at = call.issued_at;
    r.arrived_at = t;
    call.target->on_reply(call.index, r);
  }

  void expire(Conn& c) {
    const double t = now();
    std::vector<Call> expired;
    {
      std::lock_guard cl(c.mu);
      c.drop_finished_front();
      while (!c.order.empty()) {
        auto it = c.inflight.find(c.order.front());
        if (it != c.inflight.end() && it->second.deadline > t) break;
        if (it != c.inflight.end()) {
          expired.push_back(std::move(it->second));
          c.inflight.erase(it);
        }
        c.order.pop_front();
      }
    }
    for (auto& call : expired) {
      --load_[c.index];
      spdlog::debug("request on connection {} timed out", c.index);
      fail_or_retry(std::move(call), c.index, Reply::Outcome::Timeout);
    }
    if (!expired.empty()) pump_overflow(c.index);
  }

  void connection_lost(Worker& w, Conn& c) {
    if (!c.alive.exchange(false)) return;
    spdlog::warn("client connection {} lost", c.index);
    epoll_ctl(w.epoll.get(), EPOLL_CTL_DEL, c.fd.get(), nullptr);
    std::vector<Call> pending;
    {
      std::lock_guard lock(ov_mu_);
      std::lock_guard cl(c.mu);
      for (auto& [id, call] : c.inflight) pending.push_back(std::move(call));
      c.inflight.clear();
      c.order.clear();
      c.wbuf.clear();
      c.woff = 0;
      c.fd.reset();
      load_[c.index] = kDeadLoad;
      if (--alive_count_ == 0) {
        for (auto& call : overflow_) pending.push_back(std::move(call));
        overflow_.clear();
      }
    }
    for (auto& call : pending) fail_or_retry(std::move(call), c.index, Reply::Outcome::ConnectionLost);
  }

  ClientConfig cfg_;
  netsim::TimePoint origin_;
  ThreadPool copy_pool_;
  std::vector<std::unique_ptr<Conn>> conns_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::unique_ptr<std::atomic<std::size_t>[]> load_;
  std::atomic<std::size_t> alive_count_{0};
  bool degraded_ = false;
  std::atomic<bool> stopping_{false};

  std::mutex ov_mu_;
  std::deque<Call> overflow_;
  std::size_t cursor_ = 0;
  std::uint64_t next_id_ = 1;

  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> speculative_{0};
  std::atomic<std::uint64_t> retries_{0};
  std::atomic<std::size_t> max_seen_{0};
  std::atomic<std::uint64_t> get_bytes_{0};
  std::atomic<std::uint64_t> get_count_{0};

  friend class StoreClient;

 public:
  Call make_call(wire::Opcode op, std::string table, Blob payload, std::shared_ptr<ReplyTarget> target,
                 std::size_t index) const {
    Call c;
    c.op = op;
    c.table = std::move(table);
    c.payload = std::move(payload);
    c.target = std::move(target);
    c.index = index;
    c.retries_left = cfg_.retry_limit;
    return c;
  }
};

// ---- StoreClient ----

std::shared_ptr<StoreClient> StoreClient::connect(ClientConfig config) {
  config.validate();
  auto impl = std::make_unique<Impl>(std::move(config));
  impl->open();
  return std::shared_ptr<StoreClient>(new StoreClient(std::move(impl)));
}

StoreClient::StoreClient(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
StoreClient::~StoreClient() = default;

const ClientConfig& StoreClient::config() const noexcept { return impl_->config(); }
std::size_t StoreClient::num_connections() const noexcept { return impl_->num_connections(); }
bool StoreClient::degraded() const noexcept { return impl_->degraded(); }
double StoreClient::now() const noexcept { return impl_->now(); }
double StoreClient::mean_response_bytes() const noexcept { return impl_->mean_response_bytes(); }
ClientCounters StoreClient::counters() const { return impl_->counters(); }
ThreadPool& StoreClient::copy_pool() noexcept { return impl_->copy_pool(); }
std::size_t StoreClient::speculate(double ratio) { return impl_->speculate(ratio); }

void StoreClient::submit(wire::Opcode op, std::string table, Blob payload,
                         std::shared_ptr<ReplyTarget> target, std::size_t index) {
  impl_->submit(impl_->make_call(op, std::move(table), std::move(payload), std::move(target), index));
}

void StoreClient::submit_gets(const std::string& table, std::span<const SampleId> ids,
                              std::shared_ptr<ReplyTarget> target, std::size_t base) {
  std::vector<Call> calls;
  calls.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    calls.push_back(impl_->make_call(wire::Opcode::Get, table, wire::encode_id(ids[i]), target, base + i));
  }
  impl_->submit_many(std::move(calls));
}

std::future<wire::WireResponse> StoreClient::call(wire::Opcode op, std::string table, Blob payload) {
  auto target = std::make_shared<PromiseTarget>(op);
  auto fut = target->future();
  submit(op, std::move(table), std::move(payload), target, 0);
  return fut;
}

namespace {

wire::WireResponse expect_ok(std::future<wire::WireResponse> fut) {
  auto resp = fut.get();
  if (resp.status != wire::Status::Ok) rethrow_remote_error(resp.status, resp.payload);
  return resp;
}

}  // namespace

void StoreClient::ping() { expect_ok(call(wire::Opcode::Ping, "", {})); }

std::optional<StoredSample> StoreClient::get(const std::string& table, const SampleId& id) {
  auto resp = call(wire::Opcode::Get, table, wire::encode_id(id)).get();
  if (resp.status == wire::Status::NotFound) return std::nullopt;
  if (resp.status != wire::Status::Ok) rethrow_remote_error(resp.status, resp.payload);
  const auto g = wire::parse_get_payload(resp.payload);
  return StoredSample{Label::decode(g.label_kind, g.label),
                      std::make_shared<const Blob>(g.data.begin(), g.data.end())};
}

void StoreClient::put(const std::string& table, const SampleRecord& rec) {
  expect_ok(call(wire::Opcode::Put, table, wire::encode_record(rec)));
}

void StoreClient::put_atomic(const std::string& data_table, const std::string& meta_table,
                             const SampleRecord& rec, const MetadataRecord& meta) {
  expect_ok(call(wire::Opcode::PutAtomic, data_table,
                 wire::encode_atomic_put(wire::AtomicPut{meta_table, rec, meta})));
}

std::vector<SampleId> StoreClient::list_ids(const std::string& table) {
  return wire::decode_id_list(expect_ok(call(wire::Opcode::ListIds, table, {})).payload);
}

std::optional<MetadataRecord> StoreClient::get_metadata(const std::string& table, const SampleId& id) {
  auto resp = call(wire::Opcode::GetMeta, table, wire::encode_id(id)).get();
  if (resp.status == wire::Status::NotFound) return std::nullopt;
  if (resp.status != wire::Status::Ok) rethrow_remote_error(resp.status, resp.payload);
  return wire::decode_metadata(resp.payload);
}

}  // namespace ooload
