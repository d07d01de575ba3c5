#pragma once

#include <cstdint>
#include <string>

namespace ooload::net {

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
};

// "host:port"; throws InvalidInput.
HostPort parse_host_port(const std::string& text);

// Listening TCP socket (non-blocking). Throws StartupError.
int listen_tcp(const HostPort& addr, int backlog = 256);
std::uint16_t local_port(int fd);

// Blocking connect with a timeout, returned socket is non-blocking with
// TCP_NODELAY. Throws ConnectError.
int connect_tcp(const HostPort& addr, int timeout_ms = 5000);

void set_nonblocking(int fd);
void set_nodelay(int fd);

// RAII close.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) noexcept : fd_(fd) {}
  ~Fd();
  Fd(Fd&& o) noexcept : fd_(o.release()) {}
  Fd& operator=(Fd&& o) noexcept;
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const noexcept { return fd_; }
  int release() noexcept {
    int f = fd_;
    fd_ = -1;
    return f;
  }
  void reset(int fd = -1) noexcept;
  explicit operator bool() const noexcept { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

}  // namespace ooload::net
