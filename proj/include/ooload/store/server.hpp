#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "ooload/netsim/profile.hpp"
#include "ooload/store/backend.hpp"
#include "ooload/store/wire.hpp"

namespace ooload {

struct ServerConfig {
  std::string bind = "127.0.0.1:0";
  std::size_t max_inflight = 1024;
  std::size_t max_frame = wire::kDefaultMaxFrameBytes;
  // Threads running writes and listings; reads run on the I/O thread.
  std::size_t workers = 2;
  // Applied to every accepted connection, indexed by accept order.
  std::optional<netsim::NetProfile> netprofile;
  std::size_t profile_connections = 32;
};

struct ServerStats {
  std::uint64_t connections = 0;
  std::uint64_t requests = 0;
  std::uint64_t responses = 0;
  std::uint64_t bad_requests = 0;
  std::uint64_t closed_oversized = 0;
  std::uint64_t read_pauses = 0;
  std::size_t max_inflight_seen = 0;
};

// Pipelined blob-store server: one epoll I/O thread plus a worker pool.
// Responses go out in completion order. A connection stops being read while
// max_inflight requests are between "frame read" and "response written".
class Server {
 public:
  // Binds and starts serving. Throws StartupError.
  Server(std::shared_ptr<StoreBackend> backend, ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  std::string endpoint() const;
  ServerStats stats() const;
  void stop();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
  std::string host_;
};

}  // namespace ooload
