#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dtwin/protocol.hpp"

namespace dtwin {

// One accepted connection. Writes are line-atomic; a reply thread and an
// asynchronous action dispatch may interleave safely.
class ServerConn {
 public:
  uint64_t id() const { return id_; }
  bool send(const std::string& bytes);
  void close();
  bool open() const { return open_.load(); }

 private:
  friend class TcpLineServer;
  int fd_ = -1;
  uint64_t id_ = 0;
  std::mutex write_m_;
  std::atomic<bool> open_{false};
};

// Newline-framed TCP listener bound to loopback. The handler runs on the
// connection's thread: messages on one connection are handled in order,
// connections run concurrently, and a handler exception only poisons its own
// connection.
class TcpLineServer {
 public:
  // (connection, line without trailing newline, monotonic receipt time in us)
  using Handler =
      std::function<void(const std::shared_ptr<ServerConn>&, const std::string&, int64_t)>;
  using CloseHandler = std::function<void(const std::shared_ptr<ServerConn>&)>;

  TcpLineServer(int port, Handler handler);
  ~TcpLineServer();

  void set_close_handler(CloseHandler h) { on_close_ = std::move(h); }
  void start();  // throws BindFailure
  void stop();
  int port() const { return port_; }
  bool running() const { return running_.load(); }

 private:
  void accept_loop();
  void connection_loop(std::shared_ptr<ServerConn> conn);

  int requested_port_;
  int port_ = 0;
  int listen_fd_ = -1;
  Handler handler_;
  CloseHandler on_close_;
  std::atomic<bool> running_{false};
  std::atomic<uint64_t> next_conn_id_{1};
  std::thread accept_thread_;
  std::mutex conns_m_;
  std::map<uint64_t, std::shared_ptr<ServerConn>> conns_;
  std::vector<std::thread> conn_threads_;
};

// Blocking line-framed client with a read deadline.
class TcpLineClient {
 public:
  TcpLineClient() = default;
  ~TcpLineClient() { close(); }
  TcpLineClient(const TcpLineClient&) = delete;
  TcpLineClient& operator=(const TcpLineClient&) = delete;

  void connect(const std::string& host, int port);  // throws ConnectFailure
  void send(const std::string& bytes);              // throws ConnectFailure when broken
  std::optional<std::string> read_line(int timeout_ms = 5000);
  // send one message, decode the next line as its reply
  MirrorMessage request(const MirrorMessage& msg, int timeout_ms = 5000);
  void close();
  bool connected() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
  std::string buf_;
  std::mutex write_m_;
};

}  // namespace dtwin
