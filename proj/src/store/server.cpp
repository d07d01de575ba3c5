#include "ooload/store/server.hpp"

#include <sys/epoll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <sys/timerfd.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <mutex>
#include <queue>
#include <unordered_map>
#include <vector>

#include <spdlog/spdlog.h>

#include "ooload/core/error.hpp"
#include "ooload/core/thread_pool.hpp"
#include "ooload/netsim/shaper.hpp"
#include "ooload/store/net.hpp"

namespace ooload {

namespace {

constexpr std::uint64_t kListenTag = 0;
constexpr std::uint64_t kEventTag = 1;
constexpr std::uint64_t kTimerTag = 2;
constexpr std::uint64_t kFirstConnTag = 16;
constexpr std::size_t kReadChunk = 256 * 1024;
constexpr int kMaxIov = 64;

struct OutFrame {
  Blob head;
  std::shared_ptr<const Blob> body;
  std::size_t sent = 0;
  bool counted = true;  // releases one in-flight slot once written

  std::size_t size() const noexcept { return head.size() + (body ? body->size() : 0); }
};

OutFrame make_response(std::uint64_t id, wire::Status st, Blob payload) {
  OutFrame f;
  f.head.reserve(wire::frame_size(0, payload.size()));
  wire::append_frame_head(f.head, id, static_cast<std::uint8_t>(st), {}, payload.size());
  f.head.insert(f.head.end(), payload.begin(), payload.end());
  return f;
}

OutFrame error_response(std::uint64_t id, wire::Status st, const Error& e) {
  return make_response(id, st, wire::encode_error(e.kind(), e.what()));
}

struct Conn {
  std::uint64_t tag = 0;
  std::size_t index = 0;
  net::Fd fd;
  wire::FrameReader reader;
  std::size_t inflight = 0;
  bool reading = true;
  bool writing = false;
  bool closing = false;
  std::deque<OutFrame> out;
  bool shaped = false;
  netsim::ShapedConnection shape;
  netsim::TimedQueue<wire::WireRequest> inbound;
  netsim::TimedQueue<OutFrame> outbound;

  explicit Conn(std::size_t max_frame) : reader(max_frame) {}
};

}  // namespace

class Server::Impl {
 public:
  Impl(std::shared_ptr<StoreBackend> backend, ServerConfig cfg, int listen_fd)
      : backend_(std::move(backend)),
        cfg_(std::move(cfg)),
        listen_(listen_fd),
        pool_(std::make_unique<ThreadPool>(std::max<std::size_t>(cfg_.workers, 1))),
        origin_(netsim::Clock::now()) {
    epoll_.reset(epoll_create1(EPOLL_CLOEXEC));
    event_.reset(eventfd(0, EFD_NONBLOCK | EFD_CLOEXEC));
    timer_.reset(timerfd_create(CLOCK_MONOTONIC, TFD_NONBLOCK | TFD_CLOEXEC));
    if (!epoll_ || !event_ || !timer_) throw StartupError("cannot create server event descriptors");
    add(listen_.get(), kListenTag, EPOLLIN);
    add(event_.get(), kEventTag, EPOLLIN);
    add(timer_.get(), kTimerTag, EPOLLIN);
    thread_ = std::thread([this] { loop(); });
  }

  ~Impl() { stop(); }

  void stop() {
    if (stopping_.exchange(true)) return;
    wake();
    if (thread_.joinable()) thread_.join();
    pool_.reset();
  }

  ServerStats stats() const {
    std::lock_guard lock(stats_mu_);
    return stats_;
  }

 private:
  void add(int fd, std::uint64_t tag, std::uint32_t events) {
    epoll_event ev{};
    ev.events = events;
    ev.data.u64 = tag;
    epoll_ctl(epoll_.get(), EPOLL_CTL_ADD, fd, &ev);
  }

  void update_interest(Conn& c) {
    epoll_event ev{};
    ev.events = (c.reading && !c.closing ? EPOLLIN : 0u) | (c.writing ? EPOLLOUT : 0u) | EPOLLRDHUP;
    ev.data.u64 = c.tag;
    epoll_ctl(epoll_.get(), EPOLL_CTL_MOD, c.fd.get(), &ev);
  }

  void wake() {
    const std::uint64_t one = 1;
    [[maybe_unused]] auto rc = ::write(event_.get(), &one, sizeof one);
  }

  void loop() {
    std::vector<epoll_event> events(256);
    while (!stopping_) {
      const int n = epoll_wait(epoll_.get(), events.data(), static_cast<int>(events.size()), 1000);
      if (n < 0) {
        if (errno == EINTR) continue;
        spdlog::error("server epoll_wait: {}", std::strerror(errno));
        break;
      }
      for (int i = 0; i < n && !stopping_; ++i) {
        const auto tag = events[i].data.u64;
        const auto ev = events[i].events;
        if (tag == kListenTag) {
          accept_all();
        } else if (tag == kEventTag) {
          std::uint64_t v;
          while (::read(event_.get(), &v, sizeof v) > 0) {
          }
          drain_completions();
        } else if (tag == kTimerTag) {
          std::uint64_t v;
          while (::read(timer_.get(), &v, sizeof v) > 0) {
          }
          fire_timers();
        } else {
          on_conn_event(tag, ev);
        }
      }
    }
    conns_.clear();
  }

  void accept_all() {
    for (;;) {
      const int fd = ::accept4(listen_.get(), nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
      if (fd < 0) return;
      net::set_nodelay(fd);
      auto c = std::make_unique<Conn>(cfg_.max_frame);
      c->tag = next_tag_++;
      c->index = accepted_++;
      c->fd.reset(fd);
      if (cfg_.netprofile && !cfg_.netprofile->is_identity()) {
        c->shaped = true;
        c->shape = netsim::wrap_connection(*cfg_.netprofile, c->index,
                                           std::max(cfg_.profile_connections, std::size_t{1}),
                                           /*client_side=*/false, netsim::Clock::now());
      }
      add(fd, c->tag, EPOLLIN | EPOLLRDHUP);
      conns_.emplace(c->tag, std::move(c));
      std::lock_guard lock(stats_mu_);
      ++stats_.connections;
    }
  }

  Conn* find(std::uint64_t tag) {
    auto it = conns_.find(tag);
    return it == conns_.end() ? nullptr : it->second.get();
  }

  void close_conn(Conn& c) {
    epoll_ctl(epoll_.get(), EPOLL_CTL_DEL, c.fd.get(), nullptr);
    conns_.erase(c.tag);
  }

  void on_conn_event(std::uint64_t tag, std::uint32_t ev) {
    Conn* c = find(tag);
    if (c == nullptr) return;
    if (ev & EPOLLOUT) {
      if (!flush(*c)) return;
    }
    if (ev & (EPOLLIN | EPOLLRDHUP | EPOLLHUP | EPOLLERR)) {
      if (!c->reading && !(ev & (EPOLLHUP | EPOLLERR))) return;
      read_some(*c);
    }
  }

  void read_some(Conn& c) {
    auto buf = c.reader.prepare(kReadChunk);
    const ssize_t got = ::recv(c.fd.get(), buf.data(), std::min(buf.size(), kReadChunk), 0);
    if (got == 0 || (got < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)) {
      close_conn(c);
      return;
    }
    if (got > 0) c.reader.commit(static_cast<std::size_t>(got));
    parse_frames(c);
  }

  // Returns false if the connection was closed.
  bool parse_frames(Conn& c) {
    while (!c.closing && c.inflight < cfg_.max_inflight) {
      std::optional<std::span<const std::uint8_t>> frame;
      try {
        frame = c.reader.next();
      } catch (const wire::FrameTooLarge& e) {
        spdlog::warn("closing connection {}: {}", c.index, e.what());
        std::lock_guard lock(stats_mu_);
        ++stats_.closed_oversized;
        close_conn(c);
        return false;
      } catch (const DecodeError& e) {
        // The stream cannot be resynchronised after a bad prefix.
        auto resp = error_response(0, wire::Status::BadRequest, e);
        resp.counted = false;
        c.closing = true;
        note_bad_request();
        // Flushing the reply may close and free the connection.
        if (!enqueue(c, std::move(resp))) return false;
        break;
      }
      if (!frame) break;
      ++c.inflight;
      {
        std::lock_guard lock(stats_mu_);
        ++stats_.requests;
        stats_.max_inflight_seen = std::max(stats_.max_inflight_seen, c.inflight);
      }
      wire::WireRequest req;
      try {
        req = wire::decode_request(*frame, cfg_.max_frame);
      } catch (const DecodeError& e) {
        std::uint64_t id = 0;
        if (frame->size() >= wire::kPrefixBytes + 8) {
          for (int i = 7; i >= 0; --i) id = id << 8 | (*frame)[wire::kPrefixBytes + static_cast<std::size_t>(i)];
        }
        note_bad_request();
        if (!enqueue(c, error_response(id, wire::Status::BadRequest, e))) return false;
        continue;
      }
      if (c.shaped) {
        const auto now = netsim::Clock::now();
        const auto due = c.shape.inbound.schedule(now, frame->size());
        c.inbound.push(due, std::move(req));
        arm(due, c.tag);
      } else if (!execute(c, std::move(req))) {
        return false;
      }
    }
    if (c.inflight >= cfg_.max_inflight && c.reading) {
      c.reading = false;
      update_interest(c);
      std::lock_guard lock(stats_mu_);
      ++stats_.read_pauses;
    } else if (c.closing && c.reading) {
      c.reading = false;
      update_interest(c);
    }
    return true;
  }

  void note_bad_request() {
    std::lock_guard lock(stats_mu_);
    ++stats_.bad_requests;
  }

  // Returns false if the connection was closed.
  bool execute(Conn& c, wire::WireRequest req) {
    switch (req.opcode) {
      case wire::Opcode::Get:
      case wire::Opcode::GetMeta:
      case wire::Opcode::Ping:
        return enqueue(c, handle(req));
      default:
        break;
    }
    const auto tag = c.tag;
    pool_->submit([this, tag, req = std::move(req)] {
      OutFrame resp = handle(req);
      {
        std::lock_guard lock(done_mu_);
        done_.emplace_back(tag, std::move(resp));
      }
      wake();
    });
    return true;
  }

  OutFrame handle(const wire::WireRequest& req) {
    using wire::Status;
    try {
      switch (req.opcode) {
        case wire::Opcode::Ping:
          return make_response(req.request_id, Status::Ok, {});
        case wire::Opcode::Get: {
          const auto id = wire::decode_id(req.payload);
          auto s = backend_->get(req.table, id);
          if (!s) return make_response(req.request_id, Status::NotFound, {});
          OutFrame f;
          const auto payload = wire::get_payload_size(s->label, s->data->size());
          wire::append_frame_head(f.head, req.request_id, static_cast<std::uint8_t>(Status::Ok), {},
                                  payload);
          wire::append_get_head(f.head, s->label, s->data->size());
          f.body = std::move(s->data);
          return f;
        }
        case wire::Opcode::GetMeta: {
          const auto id = wire::decode_id(req.payload);
          auto m = backend_->get_metadata(req.table, id);
          if (!m) return make_response(req.request_id, Status::NotFound, {});
          return make_response(req.request_id, Status::Ok, wire::encode_metadata(*m));
        }
        case wire::Opcode::Put:
          backend_->put(req.table, wire::decode_record(req.payload));
          return make_response(req.request_id, Status::Ok, {});
        case wire::Opcode::PutAtomic: {
          auto p = wire::decode_atomic_put(req.payload);
          backend_->put_atomic(req.table, p.metadata_table, std::move(p.record), std::move(p.metadata));
          return make_response(req.request_id, Status::Ok, {});
        }
        case wire::Opcode::ListIds: {
          const auto ids = backend_->list_ids(req.table);
          return make_response(req.request_id, Status::Ok, wire::encode_id_list(ids));
        }
      }
      return make_response(req.request_id, Status::BadRequest, wire::encode_error("DecodeError", "unknown opcode"));
    } catch (const NotFound& e) {
      return error_response(req.request_id, Status::NotFound, e);
    } catch (const DecodeError& e) {
      note_bad_request();
      return error_response(req.request_id, Status::BadRequest, e);
    } catch (const DuplicateKey& e) {
      return error_response(req.request_id, Status::BadRequest, e);
    } catch (const InvalidInput& e) {
      return error_response(req.request_id, Status::BadRequest, e);
    } catch (const Error& e) {
      return error_response(req.request_id, Status::ServerError, e);
    } catch (const std::exception& e) {
      return make_response(req.request_id, Status::ServerError, wire::encode_error("ServerError", e.what()));
    }
  }

  void drain_completions() {
    std::vector<std::pair<std::uint64_t, OutFrame>> done;
    {
      std::lock_guard lock(done_mu_);
      done.swap(done_);
    }
    for (auto& [tag, frame] : done) {
      if (Conn* c = find(tag)) enqueue(*c, std::move(frame));
    }
  }

  // Returns false if the connection was closed.
  bool enqueue(Conn& c, OutFrame f) {
    if (c.shaped && f.counted) {
      const auto due = c.shape.outbound.schedule(netsim::Clock::now(), f.size());
      c.outbound.push(due, std::move(f));
      arm(due, c.tag);
      return true;
    }
    c.out.push_back(std::move(f));
    return flush(c);
  }

  // Writes as much as the socket takes. Returns false if the connection was
  // closed.
  bool flush(Conn& c) {
    while (!c.out.empty()) {
      iovec iov[kMaxIov];
      int n = 0;
      for (auto it = c.out.begin(); it != c.out.end() && n < kMaxIov - 1; ++it) {
        std::size_t skip = it->sent;
        if (skip < it->head.size()) {
          iov[n++] = {const_cast<std::uint8_t*>(it->head.data()) + skip, it->head.size() - skip};
          skip = 0;
        } else {
          skip -= it->head.size();
        }
        if (it->body && skip < it->body->size()) {
          iov[n++] = {const_cast<std::uint8_t*>(it->body->data()) + skip, it->body->size() - skip};
        }
      }
      msghdr msg{};
      msg.msg_iov = iov;
      msg.msg_iovlen = static_cast<std::size_t>(n);
      // A peer that hung up must not raise SIGPIPE in the host process.
      const ssize_t wrote = ::sendmsg(c.fd.get(), &msg, MSG_NOSIGNAL);
      if (wrote < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK) break;
        if (errno == EINTR) continue;
        close_conn(c);
        return false;
      }
      auto left = static_cast<std::size_t>(wrote);
      std::size_t released = 0;
      while (left > 0 && !c.out.empty()) {
        auto& f = c.out.front();
        const std::size_t rest = f.size() - f.sent;
        if (left >= rest) {
          left -= rest;
          if (f.counted) ++released;
          c.out.pop_front();
        } else {
          f.sent += left;
          left = 0;
        }
      }
      if (released > 0) {
        c.inflight -= released;
        std::lock_guard lock(stats_mu_);
        stats_.responses += released;
      }
    }
    const bool want = !c.out.empty();
    if (c.out.empty() && c.closing) {
      close_conn(c);
      return false;
    }
    bool changed = want != c.writing;
    c.writing = want;
    if (!c.reading && !c.closing && c.inflight < cfg_.max_inflight) {
      c.reading = true;
      changed = true;
      if (!parse_frames(c)) return false;
    }
    if (changed) update_interest(c);
    return true;
  }

  void arm(netsim::TimePoint due, std::uint64_t tag) {
    timers_.emplace(due, tag);
    if (timers_.top().first == due) set_timer(due);
  }

  void set_timer(netsim::TimePoint due) {
    const auto now = netsim::Clock::now();
    auto delta = std::chrono::duration_cast<std::chrono::nanoseconds>(due - now).count();
    if (delta < 1000) delta = 1000;
    itimerspec spec{};
    spec.it_value.tv_sec = delta / 1'000'000'000;
    spec.it_value.tv_nsec = delta % 1'000'000'000;
    timerfd_settime(timer_.get(), 0, &spec, nullptr);
  }

  void fire_timers() {
    const auto now = netsim::Clock::now();
    while (!timers_.empty() && timers_.top().first <= now) {
      const auto tag = timers_.top().second;
      timers_.pop();
      Conn* c = find(tag);
      if (c == nullptr) continue;
      bool open = true;
      while (open) {
        auto req = c->inbound.pop_due(now);
        if (!req) break;
        open = execute(*c, std::move(*req));
      }
      if (!open) continue;
      bool any = false;
      while (auto f = c->outbound.pop_due(now)) {
        c->out.push_back(std::move(*f));
        any = true;
      }
      if (any) flush(*c);
    }
    if (!timers_.empty()) set_timer(timers_.top().first);
  }

  std::shared_ptr<StoreBackend> backend_;
  ServerConfig cfg_;
  net::Fd listen_;
  net::Fd epoll_;
  net::Fd event_;
  net::Fd timer_;
  std::unique_ptr<ThreadPool> pool_;
  netsim::TimePoint origin_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};

  std::unordered_map<std::uint64_t, std::unique_ptr<Conn>> conns_;
  std::uint64_t next_tag_ = kFirstConnTag;
  std::size_t accepted_ = 0;

  using TimerEntry = std::pair<netsim::TimePoint, std::uint64_t>;
  std::priority_queue<TimerEntry, std::vector<TimerEntry>, std::greater<>> timers_;

  std::mutex done_mu_;
  std::vector<std::pair<std::uint64_t, OutFrame>> done_;

  mutable std::mutex stats_mu_;
  ServerStats stats_;
};

Server::Server(std::shared_ptr<StoreBackend> backend, ServerConfig config) {
  if (!backend) throw StartupError("server needs a backend");
  if (config.max_inflight == 0) throw StartupError("max_inflight must be >= 1");
  if (config.netprofile) config.netprofile->validate();
  const auto addr = net::parse_host_port(config.bind);
  const int fd = net::listen_tcp(addr);
  port_ = net::local_port(fd);
  host_ = addr.host == "0.0.0.0" ? "127.0.0.1" : addr.host;
  impl_ = std::make_unique<Impl>(std::move(backend), std::move(config), fd);
}

Server::~Server() { stop(); }

std::string Server::endpoint() const { return host_ + ":" + std::to_string(port_); }

ServerStats Server::stats() const { return impl_->stats(); }

void Server::stop() {
  if (impl_) impl_->stop();
}

}  // namespace ooload
