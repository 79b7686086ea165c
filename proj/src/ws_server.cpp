#include "lipwalk/ws_server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>

#include <openssl/evp.h>

#include "lipwalk/logging.hpp"

namespace lipwalk {

namespace ws {

namespace {

constexpr std::size_t kMaxPayload = 1 << 20;
constexpr const char* kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

}  // namespace

std::string accept_key(std::string_view client_key) {
  const std::string input = std::string(client_key) + kGuid;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha1(), nullptr);
  std::string out(4 * ((len + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), digest, static_cast<int>(len));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string encode_frame(const Frame& frame, std::optional<std::uint32_t> mask) {
  std::string out;
  out.push_back(static_cast<char>((frame.fin ? 0x80 : 0x00) | static_cast<std::uint8_t>(frame.opcode)));
  const std::uint64_t n = frame.payload.size();
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  if (n < 126) {
    out.push_back(static_cast<char>(mask_bit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>(n >> 8));
    out.push_back(static_cast<char>(n & 0xFF));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xFF));
  }
  if (!mask) return out + frame.payload;
  unsigned char key[4] = {static_cast<unsigned char>(*mask >> 24), static_cast<unsigned char>(*mask >> 16),
                          static_cast<unsigned char>(*mask >> 8), static_cast<unsigned char>(*mask)};
  out.append(reinterpret_cast<const char*>(key), 4);
  for (std::size_t i = 0; i < frame.payload.size(); ++i)
    out.push_back(static_cast<char>(static_cast<unsigned char>(frame.payload[i]) ^ key[i % 4]));
  return out;
}

std::optional<Frame> FrameDecoder::next() {
  const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data());
  const std::size_t avail = buffer_.size();
  if (avail < 2) return std::nullopt;
  Frame f;
  f.fin = (p[0] & 0x80) != 0;
  if ((p[0] & 0x70) != 0) throw ProtocolError("reserved bits set");
  f.opcode = static_cast<Opcode>(p[0] & 0x0F);
  const bool masked = (p[1] & 0x80) != 0;
  std::uint64_t n = p[1] & 0x7F;
  std::size_t pos = 2;
  if (n == 126) {
    if (avail < 4) return std::nullopt;
    n = (std::uint64_t{p[2]} << 8) | p[3];
    pos = 4;
  } else if (n == 127) {
    if (avail < 10) return std::nullopt;
    n = 0;
    for (int i = 0; i < 8; ++i) n = (n << 8) | p[2 + i];
    pos = 10;
  }
  if (n > kMaxPayload) throw ProtocolError("frame too large");
  unsigned char key[4] = {0, 0, 0, 0};
  if (masked) {
    if (avail < pos + 4) return std::nullopt;
    std::memcpy(key, p + pos, 4);
    pos += 4;
  }
  if (avail < pos + n) return std::nullopt;
  f.payload.assign(buffer_, pos, n);
  if (masked)
    for (std::size_t i = 0; i < n; ++i) f.payload[i] = static_cast<char>(static_cast<unsigned char>(f.payload[i]) ^ key[i % 4]);
  buffer_.erase(0, pos + n);
  return f;
}

}  // namespace ws

namespace {

using Clock = std::chrono::steady_clock;

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

// Returns the client key, or nothing if this is not a WebSocket upgrade.
std::optional<std::string> parse_upgrade(const std::string& request) {
  std::optional<std::string> key;
  bool upgrade = false;
  std::size_t pos = request.find("\r\n");
  if (request.rfind("GET ", 0) != 0 || pos == std::string::npos) return std::nullopt;
  while (true) {
    const std::size_t start = pos + 2;
    pos = request.find("\r\n", start);
    if (pos == std::string::npos || pos == start) break;
    const std::string line = request.substr(start, pos - start);
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string name = lower(trim(line.substr(0, colon)));
    const std::string value = trim(line.substr(colon + 1));
    if (name == "upgrade" && lower(value).find("websocket") != std::string::npos) upgrade = true;
    if (name == "sec-websocket-key") key = value;
  }
  if (!upgrade) return std::nullopt;
  return key;
}

}  // namespace

struct SessionServer::Connection {
  int fd = -1;
  std::thread worker;
  std::atomic<bool> done{false};

  std::mutex write_mutex;
  std::mutex queue_mutex;
  std::condition_variable cv;
  std::deque<std::string> lines;
  bool closed = false;

  bool send_frame(ws::Opcode op, std::string payload) {
    std::lock_guard lock(write_mutex);
    return send_all(fd, ws::encode_frame({true, op, std::move(payload)}));
  }
  bool send_json(const nlohmann::json& j) { return send_frame(ws::Opcode::Text, j.dump() + "\n"); }
  bool send_error(const std::string& reason) { return send_json({{"type", "error"}, {"reason", reason}}); }

  void mark_closed() {
    {
      std::lock_guard lock(queue_mutex);
      closed = true;
    }
    cv.notify_all();
  }

  void push_lines(const std::string& message) {
    std::size_t start = 0;
    std::vector<std::string> batch;
    while (start <= message.size()) {
      std::size_t end = message.find('\n', start);
      if (end == std::string::npos) end = message.size();
      std::string line = trim(std::string_view(message).substr(start, end - start));
      if (!line.empty()) batch.push_back(std::move(line));
      start = end + 1;
    }
    if (batch.empty()) return;
    {
      std::lock_guard lock(queue_mutex);
      for (auto& l : batch) lines.push_back(std::move(l));
    }
    cv.notify_all();
  }

  void read_loop(std::string leftover) {
    ws::FrameDecoder decoder;
    decoder.feed(leftover);
    std::string message;
    bool in_text = false;
    char buf[4096];
    try {
      while (true) {
        while (auto frame = decoder.next()) {
          switch (frame->opcode) {
            case ws::Opcode::Text:
              message = std::move(frame->payload);
              in_text = !frame->fin;
              if (frame->fin) push_lines(message);
              break;
            case ws::Opcode::Continuation:
              if (!in_text) break;
              message += frame->payload;
              if (frame->fin) {
                in_text = false;
                push_lines(message);
              }
              break;
            case ws::Opcode::Binary:
              send_error("binary frames are not supported");
              break;
            case ws::Opcode::Ping:
              send_frame(ws::Opcode::Pong, frame->payload);
              break;
            case ws::Opcode::Pong:
              break;
            case ws::Opcode::Close:
              send_frame(ws::Opcode::Close, frame->payload.substr(0, 2));
              mark_closed();
              return;
            default:
              throw ProtocolError("unknown opcode");
          }
        }
        const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
      }
    } catch (const ProtocolError& e) {
      log(LogLevel::Warn, std::string("closing connection: ") + e.what());
      send_frame(ws::Opcode::Close, std::string("\x03\xea", 2));
    }
    mark_closed();
  }

  void run(const ServeOptions& options) {
    std::string request;
    char buf[4096];
    while (request.find("\r\n\r\n") == std::string::npos && request.size() < 16384) {
      const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
      if (n <= 0) return finish();
      request.append(buf, static_cast<std::size_t>(n));
    }
    const auto header_end = request.find("\r\n\r\n");
    if (header_end == std::string::npos) return finish();
    const auto key = parse_upgrade(request.substr(0, header_end + 2));
    if (!key) {
      const std::string body = "lipwalk session server: connect with a WebSocket client\n";
      send_all(fd, "HTTP/1.1 426 Upgrade Required\r\nUpgrade: websocket\r\nConnection: close\r\nContent-Type: text/plain\r\n"
                   "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body);
      return finish();
    }
    if (!send_all(fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                      "Sec-WebSocket-Accept: " + ws::accept_key(*key) + "\r\n\r\n"))
      return finish();

    std::thread reader(&Connection::read_loop, this, request.substr(header_end + 4));
    try {
      execute(options);
    } catch (const std::exception& e) {
      log(LogLevel::Error, std::string("session failed: ") + e.what());
      send_error(e.what());
    }
    ::shutdown(fd, SHUT_RDWR);
    reader.join();
    finish();
  }

  void execute(const ServeOptions& options) {
    Session session(options.model, options.gait, options.initial, options.session);
    const auto started = Clock::now();
    auto wall = [&] { return std::chrono::duration<double>(Clock::now() - started).count(); };
    auto send_update = [&](SessionUpdate u) {
      u.wall_time = wall();
      return send_json(to_json(u));
    };
    auto interval = [&] {
      return std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(1.0 / (session.tick_rate() * session.speed())));
    };
    log(LogLevel::Info, "session opened");
    if (!send_json(session.handshake()) || !send_update(session.snapshot())) return;

    auto next_tick = Clock::now();
    while (true) {
      std::deque<std::string> batch;
      {
        std::unique_lock lock(queue_mutex);
        if (session.running())
          cv.wait_until(lock, next_tick, [&] { return closed; });
        else
          cv.wait(lock, [&] { return closed || !lines.empty(); });
        if (closed) break;
        batch.swap(lines);
      }
      const bool was_running = session.running();
      std::vector<SessionCommand> commands;
      for (const auto& line : batch) {
        try {
          commands.push_back(parse_command(line));
        } catch (const ProtocolError& e) {
          if (!send_error(e.what())) return;
        }
      }
      std::vector<SessionUpdate> updates;
      try {
        updates = session.apply(commands);
      } catch (const std::invalid_argument& e) {
        if (!send_error(e.what())) return;
      }
      for (auto& u : updates)
        if (!send_update(std::move(u))) return;

      if (!session.running()) continue;
      const auto now = Clock::now();
      if (!was_running) {
        next_tick = now + interval();
      } else if (now >= next_tick) {
        if (auto u = session.tick(); u && !send_update(std::move(*u))) return;
        next_tick += interval();
        if (next_tick < now) next_tick = now + interval();
      }
    }
    log(LogLevel::Info, "session closed");
  }

  // The descriptor stays open until the server joins this connection, so a
  // concurrent shutdown() from stop() never hits a recycled fd.
  void finish() {
    ::shutdown(fd, SHUT_RDWR);
    done = true;
  }
};

SessionServer::SessionServer(ServeOptions options) : options_(std::move(options)) {
  if (!(options_.session.tick_rate > 0.0)) throw InvalidParameter("tick rate must be > 0");
  if (options_.port < 0 || options_.port > 65535) throw InvalidParameter("port must be in [0, 65535]");
}

SessionServer::~SessionServer() { stop(); }

int SessionServer::start() {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  if (::getaddrinfo(options_.host.c_str(), std::to_string(options_.port).c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("cannot resolve host " + options_.host);
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  const int rc = ::bind(listen_fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (listen_fd_ < 0 || rc != 0 || ::listen(listen_fd_, 8) != 0) {
    const std::string err = std::strerror(errno);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on " + options_.host + ":" + std::to_string(options_.port) + ": " + err);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  stopping_ = false;
  acceptor_ = std::thread(&SessionServer::accept_loop, this);
  log(LogLevel::Info, "listening on " + options_.host + ":" + std::to_string(port_));
  return port_;
}

void SessionServer::accept_loop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) {
      reap(false);
      continue;
    }
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    {
      std::lock_guard lock(mutex_);
      connections_.push_back(conn);
    }
    conn->worker = std::thread([conn, this] { conn->run(options_); });
    reap(false);
  }
}

void SessionServer::reap(bool all) {
  std::vector<std::shared_ptr<Connection>> finished;
  {
    std::lock_guard lock(mutex_);
    auto it = std::stable_partition(connections_.begin(), connections_.end(),
                                    [all](const auto& c) { return !all && !c->done; });
    finished.assign(it, connections_.end());
    connections_.erase(it, connections_.end());
  }
  for (auto& c : finished) {
    if (all && !c->done) ::shutdown(c->fd, SHUT_RDWR);
    if (c->worker.joinable()) c->worker.join();
    ::close(c->fd);
  }
}

void SessionServer::stop() {
  if (listen_fd_ < 0) return;
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  reap(true);
}

std::size_t SessionServer::active_connections() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(connections_.begin(), connections_.end(), [](const auto& c) { return !c->done; }));
}

}  // namespace lipwalk
