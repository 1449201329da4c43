#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spinsched/protocol.hpp"

namespace spinsched {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
};

// "host:port"; throws UsageError on anything else.
Endpoint parse_endpoint(const std::string& text);

/// Owning TCP socket file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  static Socket connect(const Endpoint& endpoint);

  bool valid() const noexcept { return fd_ >= 0; }
  int fd() const noexcept { return fd_; }

  void send_all(std::span<const std::uint8_t> bytes);
  // Returns false on orderly EOF before the first byte; throws RunError on
  // EOF mid-buffer or socket errors.
  bool recv_exact(std::span<std::uint8_t> bytes);

  void send_message(const Message& message) { send_all(encode_frame(message)); }
  // nullopt on clean EOF at a frame boundary.
  std::optional<Message> recv_message();

  // Unblocks a reader in another thread without closing the descriptor.
  void shutdown() noexcept;

 private:
  int fd_ = -1;
};

class Listener {
 public:
  // Port 0 picks an ephemeral port; see endpoint().
  explicit Listener(const Endpoint& endpoint);

  Endpoint endpoint() const { return bound_; }
  // nullopt on timeout.
  std::optional<Socket> accept(std::chrono::milliseconds timeout);

 private:
  Socket socket_;
  Endpoint bound_;
};

}  // namespace spinsched
