#pragma once

// Minimal WebSocket transport for live sessions. Each connection owns one
// Session; a reader thread queues incoming lines and the connection thread is
// the only one touching the dynamics.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "lipwalk/session.hpp"

namespace lipwalk {

namespace ws {

enum class Opcode : std::uint8_t { Continuation = 0x0, Text = 0x1, Binary = 0x2, Close = 0x8, Ping = 0x9, Pong = 0xA };

struct Frame {
  bool fin = true;
  Opcode opcode = Opcode::Text;
  std::string payload;
};

/// Sec-WebSocket-Accept value for a client key.
std::string accept_key(std::string_view client_key);

/// Serializes one frame. Clients must pass a mask key; servers must not.
std::string encode_frame(const Frame& frame, std::optional<std::uint32_t> mask = std::nullopt);

/// Incremental frame parser. Feed raw bytes, pull complete frames.
class FrameDecoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  /// Throws ProtocolError on frames this implementation refuses.
  std::optional<Frame> next();

 private:
  std::string buffer_;
};

}  // namespace ws

struct ServeOptions {
  std::string host = "127.0.0.1";
  /// 0 picks an ephemeral port; start() reports the bound one.
  int port = 8765;
  ModelParams<double> model{10.0, 1.0};
  GaitCommand gait;
  WorldState initial;
  SessionOptions session;
};

class SessionServer {
 public:
  explicit SessionServer(ServeOptions options);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds, listens and starts accepting. Returns the bound port.
  int start();
  /// Closes the listener and every live connection, then joins.
  void stop();
  int port() const { return port_; }
  std::size_t active_connections() const;

 private:
  struct Connection;

  void accept_loop();
  void reap(bool all);

  ServeOptions options_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<Connection>> connections_;
};

}  // namespace lipwalk
