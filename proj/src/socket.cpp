#include "spinsched/socket.hpp"

#include <array>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "spinsched/error.hpp"

namespace spinsched {
namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw RunError(what + ": " + std::strerror(errno));
}

struct AddrInfo {
  addrinfo* list = nullptr;
  ~AddrInfo() {
    if (list) freeaddrinfo(list);
  }
};

AddrInfo resolve(const Endpoint& endpoint, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  AddrInfo info;
  const std::string port = std::to_string(endpoint.port);
  const int rc = getaddrinfo(endpoint.host.empty() ? nullptr : endpoint.host.c_str(), port.c_str(),
                             &hints, &info.list);
  if (rc != 0) throw RunError("cannot resolve " + endpoint.to_string() + ": " + gai_strerror(rc));
  return info;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw UsageError("expected host:port, got '" + text + "'");
  }
  Endpoint e;
  e.host = text.substr(0, colon);
  if (e.host.empty()) e.host = "127.0.0.1";
  const char* first = text.data() + colon + 1;
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, e.port);
  if (ec != std::errc{} || ptr != last) throw UsageError("invalid port in '" + text + "'");
  return e;
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket Socket::connect(const Endpoint& endpoint) {
  AddrInfo info = resolve(endpoint, false);
  for (addrinfo* ai = info.list; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      set_nodelay(s.fd());
      return s;
    }
  }
  throw_errno("cannot connect to " + endpoint.to_string());
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send failed");
    }
    bytes = bytes.subspan(static_cast<std::size_t>(n));
  }
}

bool Socket::recv_exact(std::span<std::uint8_t> bytes) {
  std::size_t got = 0;
  while (got < bytes.size()) {
    const ssize_t n = ::recv(fd_, bytes.data() + got, bytes.size() - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("recv failed");
    }
    if (n == 0) {
      if (got == 0) return false;
      throw RunError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<Message> Socket::recv_message() {
  std::array<std::uint8_t, kFrameHeaderSize> header{};
  if (!recv_exact(header)) return std::nullopt;
  const std::uint32_t length = read_frame_length(header);
  std::vector<std::uint8_t> body(length);
  if (length > 0 && !recv_exact(body)) throw RunError("connection closed mid-frame");
  return decode_body(body);
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Listener::Listener(const Endpoint& endpoint) {
  AddrInfo info = resolve(endpoint, true);
  for (addrinfo* ai = info.list; ai && !socket_.valid(); ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(s.fd(), 64) == 0) {
      socket_ = std::move(s);
    }
  }
  if (!socket_.valid()) throw_errno("cannot listen on " + endpoint.to_string());
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  bound_.host = endpoint.host;
  bound_.port = ntohs(addr.sin_port);
}

std::optional<Socket> Listener::accept(std::chrono::milliseconds timeout) {
  pollfd pfd{socket_.fd(), POLLIN, 0};
  const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc < 0) throw_errno("poll failed");
  if (rc == 0) return std::nullopt;
  Socket s(::accept(socket_.fd(), nullptr, nullptr));
  if (!s.valid()) throw_errno("accept failed");
  set_nodelay(s.fd());
  return s;
}

}  // namespace spinsched
