#include "ooload/store/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ooload/core/error.hpp"

namespace ooload::net {

HostPort parse_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw InvalidInput("expected host:port, got '" + text + "'");
  }
  HostPort hp;
  hp.host = text.substr(0, colon);
  if (hp.host.empty()) hp.host = "0.0.0.0";
  try {
    std::size_t used = 0;
    const long port = std::stol(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || port < 0 || port > 65535) throw std::out_of_range("port");
    hp.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw InvalidInput("bad port in '" + text + "'");
  }
  return hp;
}

namespace {

sockaddr_in resolve(const HostPort& addr, bool for_bind) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  const std::string host = addr.host == "localhost" ? "127.0.0.1" : addr.host;
  if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    if (for_bind) throw StartupError("cannot resolve bind host '" + addr.host + "'");
    throw ConnectError("cannot resolve host '" + addr.host + "'");
  }
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return sa;
}

}  // namespace

void set_nonblocking(int fd) {
  const int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

void set_nodelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

int listen_tcp(const HostPort& addr, int backlog) {
  const sockaddr_in sa = resolve(addr, true);
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd) throw StartupError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
    throw StartupError("cannot bind " + addr.str() + ": " + std::strerror(errno));
  }
  if (::listen(fd.get(), backlog) != 0) {
    throw StartupError("cannot listen on " + addr.str() + ": " + std::strerror(errno));
  }
  set_nonblocking(fd.get());
  return fd.release();
}

std::uint16_t local_port(int fd) {
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  return ntohs(sa.sin_port);
}

int connect_tcp(const HostPort& addr, int timeout_ms) {
  const sockaddr_in sa = resolve(addr, false);
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd) throw ConnectError(std::string("socket: ") + std::strerror(errno));
  set_nonblocking(fd.get());
  int rc = ::connect(fd.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa);
  if (rc != 0 && errno != EINPROGRESS) {
    throw ConnectError("cannot connect to " + addr.str() + ": " + std::strerror(errno));
  }
  if (rc != 0) {
    pollfd p{fd.get(), POLLOUT, 0};
    rc = ::poll(&p, 1, timeout_ms);
    if (rc <= 0) throw ConnectError("timed out connecting to " + addr.str());
    int err = 0;
    socklen_t len = sizeof err;
    getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw ConnectError("cannot connect to " + addr.str() + ": " + std::strerror(err));
  }
  set_nodelay(fd.get());
  return fd.release();
}

Fd::~Fd() { reset(); }

Fd& Fd::operator=(Fd&& o) noexcept {
  if (this != &o) reset(o.release());
  return *this;
}

void Fd::reset(int fd) noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = fd;
}

}  // namespace ooload::net
