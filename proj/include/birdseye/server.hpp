#pragma once

#include "birdseye/io.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace birdseye {

enum class MessageKind { snapshot, entities, event, ack };

// Fan-out publisher for engine output. Each connection is either a WebSocket
// (detected from the HTTP upgrade request) or plain TCP carrying one JSON
// message per line; both carry the same messages and accept JSON commands.
//
// Every subscriber has a bounded queue. When it is full, the oldest queued
// `entities` message is dropped; if none is left to drop, the subscriber is
// disconnected rather than losing an event.
class Server {
 public:
  struct Command {
    std::uint64_t client = 0;
    Json body;
  };

  // port 0 binds an ephemeral port.
  explicit Server(std::uint16_t port, std::size_t queue_limit = 256);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();
  std::uint16_t port() const { return port_; }

  // Replaces the snapshot sent to new subscribers.
  void set_snapshot(Json snapshot);
  // Updates the snapshot and fans out one frame's messages atomically, so a
  // subscriber sees either the old snapshot plus these deltas or the new snapshot.
  void publish_frame(Json snapshot, const Json& entities, const std::vector<Json>& events);
  void send(std::uint64_t client, const Json& message);

  std::vector<Command> take_commands();
  // Waits until a command is queued or the timeout expires.
  bool wait_for_commands(std::chrono::milliseconds timeout);

  std::size_t subscriber_count() const;
  std::size_t dropped_subscribers() const { return dropped_subscribers_; }

 private:
  struct Client;

  void accept_loop();
  void reader_loop(std::shared_ptr<Client> client);
  void writer_loop(std::shared_ptr<Client> client);
  void enqueue_locked(Client& c, MessageKind kind, std::string payload);
  void reap_locked();

  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  std::size_t queue_limit_;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;

  mutable std::mutex mutex_;
  std::map<std::uint64_t, std::shared_ptr<Client>> clients_;
  std::uint64_t next_client_ = 1;
  std::string snapshot_;
  std::vector<std::shared_ptr<Client>> graveyard_;
  std::atomic<std::size_t> dropped_subscribers_{0};

  std::mutex cmd_mutex_;
  std::condition_variable cmd_cv_;
  std::deque<Command> commands_;
};

// Accepts pose producers on a TCP port; each connection streams NDJSON lines.
class PoseListener {
 public:
  explicit PoseListener(std::uint16_t port);
  ~PoseListener();
  PoseListener(const PoseListener&) = delete;
  PoseListener& operator=(const PoseListener&) = delete;

  std::uint16_t port() const { return port_; }
  // Next complete line, or nullopt after `timeout` without one.
  std::optional<std::string> next_line(std::chrono::milliseconds timeout);
  // True once a producer disconnected since the last call.
  bool take_disconnect();

 private:
  int listen_fd_ = -1;
  int client_fd_ = -1;
  std::uint16_t port_ = 0;
  std::string buffer_;
  bool disconnected_ = false;
};

// Minimal blocking client used by `birdseye ctl`: sends one command line and
// returns the matching ack.
Json send_command(const std::string& host, std::uint16_t port, Json command,
                  std::chrono::milliseconds timeout = std::chrono::seconds(5));

// Sec-WebSocket-Accept value for a handshake key.
std::string websocket_accept_key(const std::string& key);

}  // namespace birdseye
