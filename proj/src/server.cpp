#include "birdseye/server.hpp"

#include "birdseye/error.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>
#include <spdlog/spdlog.h>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <functional>

namespace birdseye {

namespace {

constexpr const char* kWebSocketGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

bool write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

std::string websocket_frame(std::string_view payload, std::uint8_t opcode = 0x1) {
  std::string f;
  f.push_back(static_cast<char>(0x80 | opcode));
  const auto n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<char>(n));
  } else if (n <= 0xffff) {
    f.push_back(static_cast<char>(126));
    f.push_back(static_cast<char>((n >> 8) & 0xff));
    f.push_back(static_cast<char>(n & 0xff));
  } else {
    f.push_back(static_cast<char>(127));
    for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xff));
  }
  f.append(payload);
  return f;
}

int listen_on(std::uint16_t port, std::uint16_t& bound) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket() failed");
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 16) != 0) {
    ::close(fd);
    throw std::runtime_error("cannot listen on port " + std::to_string(port) + ": " + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  bound = ntohs(addr.sin_port);
  return fd;
}

bool readable(int fd, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  return ::poll(&p, 1, timeout_ms) > 0;
}

// Blocking buffered reads over a socket.
class SocketReader {
 public:
  explicit SocketReader(int fd) : fd_(fd) {}

  bool fill() {
    char chunk[4096];
    const auto n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) return false;
    buf_.append(chunk, static_cast<std::size_t>(n));
    return true;
  }

  std::optional<std::string> line() {
    for (;;) {
      const auto pos = buf_.find('\n');
      if (pos != std::string::npos) {
        std::string out = buf_.substr(0, pos);
        buf_.erase(0, pos + 1);
        if (!out.empty() && out.back() == '\r') out.pop_back();
        return out;
      }
      if (!fill()) return std::nullopt;
    }
  }

  std::optional<std::string> exact(std::size_t n) {
    while (buf_.size() < n)
      if (!fill()) return std::nullopt;
    std::string out = buf_.substr(0, n);
    buf_.erase(0, n);
    return out;
  }

  const std::string& buffer() const { return buf_; }

 private:
  int fd_;
  std::string buf_;
};

// Reads one complete (possibly fragmented) text message; nullopt on close.
// Control replies (pong, close echo) go through `reply`.
std::optional<std::string> read_websocket_message(SocketReader& in,
                                                  const std::function<void(const std::string&)>& reply) {
  std::string message;
  for (;;) {
    const auto head = in.exact(2);
    if (!head) return std::nullopt;
    const auto b0 = static_cast<std::uint8_t>((*head)[0]);
    const auto b1 = static_cast<std::uint8_t>((*head)[1]);
    const bool fin = b0 & 0x80;
    const int opcode = b0 & 0x0f;
    std::uint64_t len = b1 & 0x7f;
    if (len == 126 || len == 127) {
      const auto ext = in.exact(len == 126 ? 2 : 8);
      if (!ext) return std::nullopt;
      len = 0;
      for (unsigned char c : *ext) len = (len << 8) | c;
    }
    std::array<std::uint8_t, 4> mask{};
    if (b1 & 0x80) {
      const auto m = in.exact(4);
      if (!m) return std::nullopt;
      std::copy(m->begin(), m->end(), mask.begin());
    }
    auto payload = in.exact(static_cast<std::size_t>(len));
    if (!payload) return std::nullopt;
    if (b1 & 0x80)
      for (std::size_t i = 0; i < payload->size(); ++i) (*payload)[i] = static_cast<char>((*payload)[i] ^ mask[i % 4]);
    if (opcode == 0x8) {
      reply(websocket_frame(payload->substr(0, 2), 0x8));
      return std::nullopt;
    }
    if (opcode == 0x9) {
      reply(websocket_frame(*payload, 0xA));
      continue;
    }
    if (opcode == 0xA) continue;
    message += *payload;
    if (fin) return message;
  }
}

std::string header_value(const std::string& request, const std::string& name) {
  std::string lower = request;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  auto pos = lower.find("\n" + key + ":");
  if (pos == std::string::npos) return {};
  pos += key.size() + 2;
  const auto end = request.find("\r\n", pos);
  std::string v = request.substr(pos, end - pos);
  v.erase(0, v.find_first_not_of(" \t"));
  v.erase(v.find_last_not_of(" \t\r") + 1);
  return v;
}

}  // namespace

std::string websocket_accept_key(const std::string& key) {
  const std::string in = key + kWebSocketGuid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(in.data()), in.size(), digest);
  unsigned char out[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  const int n = EVP_EncodeBlock(out, digest, SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<char*>(out), static_cast<std::size_t>(n));
}

struct Server::Client {
  std::uint64_t id = 0;
  int fd = -1;
  bool websocket = false;
  bool subscribed = false;
  std::atomic<bool> alive{true};
  std::deque<std::pair<MessageKind, std::string>> queue;  // guarded by Server::mutex_
  std::condition_variable cv;
  std::mutex write_mutex;
  std::thread reader;
  std::thread writer;

  void kill() {
    alive = false;
    ::shutdown(fd, SHUT_RDWR);
    cv.notify_all();
  }
};

Server::Server(std::uint16_t port, std::size_t queue_limit) : queue_limit_(queue_limit) {
  listen_fd_ = listen_on(port, port_);
}

Server::~Server() { stop(); }

void Server::start() {
  if (running_.exchange(true)) return;
  accept_thread_ = std::thread([this] { accept_loop(); });
  spdlog::info("serving engine output on port {}", port_);
}

void Server::stop() {
  if (running_.exchange(false)) accept_thread_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::vector<std::shared_ptr<Client>> all;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, c] : clients_) all.push_back(c);
    clients_.clear();
    all.insert(all.end(), graveyard_.begin(), graveyard_.end());
    graveyard_.clear();
    for (auto& c : all) c->kill();
  }
  for (auto& c : all) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
    ::close(c->fd);
  }
}

void Server::accept_loop() {
  while (running_) {
    if (!readable(listen_fd_, 100)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    auto c = std::make_shared<Client>();
    c->fd = fd;
    {
      std::lock_guard lock(mutex_);
      c->id = next_client_++;
      clients_[c->id] = c;
    }
    c->reader = std::thread([this, c] { reader_loop(c); });
  }
}

void Server::reader_loop(std::shared_ptr<Client> c) {
  SocketReader in(c->fd);
  // A WebSocket client speaks first; a silent client is a plain TCP subscriber.
  if (readable(c->fd, 200)) {
    while (in.buffer().size() < 4 && in.buffer().find('\n') == std::string::npos)
      if (!in.fill()) break;
    c->websocket = in.buffer().starts_with("GET ");
  }
  if (c->websocket) {
    std::string request;
    while (request.find("\r\n\r\n") == std::string::npos) {
      auto l = in.line();
      if (!l) break;
      request += *l + "\r\n";
      if (l->empty()) break;
    }
    const auto key = header_value(request, "Sec-WebSocket-Key");
    if (key.empty()) {
      write_all(c->fd, "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n");
      c->kill();
      return;
    }
    write_all(c->fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
                     "Connection: Upgrade\r\nSec-WebSocket-Accept: " +
                         websocket_accept_key(key) + "\r\n\r\n");
  }

  {
    std::lock_guard lock(mutex_);
    c->subscribed = true;
    if (!snapshot_.empty()) enqueue_locked(*c, MessageKind::snapshot, snapshot_);
    c->writer = std::thread([this, c] { writer_loop(c); });
  }

  const auto reply = [&c](const std::string& frame) {
    std::lock_guard lock(c->write_mutex);
    write_all(c->fd, frame);
  };
  while (c->alive) {
    std::optional<std::string> msg = c->websocket ? read_websocket_message(in, reply) : in.line();
    if (!msg) break;
    if (msg->find_first_not_of(" \t\r") == std::string::npos) continue;
    Json body;
    try {
      body = Json::parse(*msg);
    } catch (const Json::exception& e) {
      std::lock_guard lock(mutex_);
      enqueue_locked(*c, MessageKind::ack,
                     dump_line({{"type", "ack"}, {"id", nullptr}, {"ok", false},
                                {"error", std::string("malformed command: ") + e.what()}}));
      continue;
    }
    {
      std::lock_guard lock(cmd_mutex_);
      commands_.push_back({c->id, std::move(body)});
    }
    cmd_cv_.notify_all();
  }
  std::lock_guard lock(mutex_);
  c->kill();
}

void Server::writer_loop(std::shared_ptr<Client> c) {
  for (;;) {
    std::string payload;
    {
      std::unique_lock lock(mutex_);
      c->cv.wait(lock, [&] { return !c->queue.empty() || !c->alive; });
      if (!c->alive) return;
      payload = std::move(c->queue.front().second);
      c->queue.pop_front();
    }
    std::unique_lock write_lock(c->write_mutex);
    const bool ok = c->websocket ? write_all(c->fd, websocket_frame(payload))
                                 : write_all(c->fd, payload + "\n");
    write_lock.unlock();
    if (!ok) {
      std::lock_guard lock(mutex_);
      c->kill();
      return;
    }
  }
}

void Server::enqueue_locked(Client& c, MessageKind kind, std::string payload) {
  if (!c.alive) return;
  if (c.queue.size() >= queue_limit_) {
    const auto stale = std::find_if(c.queue.begin(), c.queue.end(),
                                    [](const auto& m) { return m.first == MessageKind::entities; });
    if (stale != c.queue.end()) {
      c.queue.erase(stale);
    } else if (kind == MessageKind::entities) {
      return;
    } else {
      spdlog::warn("subscriber {} cannot keep up; disconnecting", c.id);
      ++dropped_subscribers_;
      c.kill();
      return;
    }
  }
  c.queue.emplace_back(kind, std::move(payload));
  c.cv.notify_one();
}

void Server::reap_locked() {
  for (auto it = clients_.begin(); it != clients_.end();) {
    if (!it->second->alive) {
      graveyard_.push_back(it->second);
      it = clients_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::set_snapshot(Json snapshot) {
  std::lock_guard lock(mutex_);
  snapshot_ = dump_line(snapshot);
}

void Server::publish_frame(Json snapshot, const Json& entities, const std::vector<Json>& events) {
  std::vector<std::shared_ptr<Client>> dead;
  {
    std::lock_guard lock(mutex_);
    snapshot_ = dump_line(snapshot);
    const auto ent = dump_line(entities);
    std::vector<std::string> evs;
    for (const auto& e : events) evs.push_back(dump_line(e));
    for (auto& [id, c] : clients_) {
      if (!c->subscribed) continue;
      for (const auto& e : evs) enqueue_locked(*c, MessageKind::event, e);
      enqueue_locked(*c, MessageKind::entities, ent);
    }
    reap_locked();
    dead.swap(graveyard_);
  }
  for (auto& c : dead) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
    ::close(c->fd);
  }
}

void Server::send(std::uint64_t client, const Json& message) {
  std::lock_guard lock(mutex_);
  const auto it = clients_.find(client);
  if (it != clients_.end()) enqueue_locked(*it->second, MessageKind::ack, dump_line(message));
}

std::vector<Server::Command> Server::take_commands() {
  std::lock_guard lock(cmd_mutex_);
  std::vector<Command> out(std::make_move_iterator(commands_.begin()),
                           std::make_move_iterator(commands_.end()));
  commands_.clear();
  return out;
}

bool Server::wait_for_commands(std::chrono::milliseconds timeout) {
  std::unique_lock lock(cmd_mutex_);
  return cmd_cv_.wait_for(lock, timeout, [&] { return !commands_.empty(); });
}

std::size_t Server::subscriber_count() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(clients_.begin(), clients_.end(), [](const auto& kv) {
    return kv.second->alive && kv.second->subscribed;
  }));
}

PoseListener::PoseListener(std::uint16_t port) { listen_fd_ = listen_on(port, port_); }

PoseListener::~PoseListener() {
  if (client_fd_ >= 0) ::close(client_fd_);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

bool PoseListener::take_disconnect() { return std::exchange(disconnected_, false); }

std::optional<std::string> PoseListener::next_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    const int fd = client_fd_ >= 0 ? client_fd_ : listen_fd_;
    if (!readable(fd, static_cast<int>(left.count()))) return std::nullopt;
    if (client_fd_ < 0) {
      client_fd_ = ::accept(listen_fd_, nullptr, nullptr);
      continue;
    }
    char chunk[4096];
    const auto n = ::recv(client_fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) {
      ::close(client_fd_);
      client_fd_ = -1;
      disconnected_ = true;
      if (!buffer_.empty()) {
        std::string line;
        line.swap(buffer_);
        return line;
      }
      continue;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

Json send_command(const std::string& host, std::uint16_t port, Json command,
                  std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("cannot resolve " + host);
  int fd = -1;
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd >= 0 && ::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port));

  if (!command.contains("id")) command["id"] = static_cast<std::int64_t>(::getpid());
  const Json id = command["id"];
  write_all(fd, dump_line(command) + "\n");

  SocketReader in(fd);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::optional<Json> ack;
  while (!ack) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0 || (in.buffer().find('\n') == std::string::npos &&
                              !readable(fd, static_cast<int>(left.count()))))
      break;
    const auto line = in.line();
    if (!line) break;
    try {
      auto msg = Json::parse(*line);
      if (msg.value("type", "") == "ack" && msg.value("id", Json()) == id) ack = std::move(msg);
    } catch (const Json::exception&) {
    }
  }
  ::close(fd);
  if (!ack) throw std::runtime_error("no acknowledgement from engine");
  return *ack;
}

}  // namespace birdseye
