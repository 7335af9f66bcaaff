#include "dtwin/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace dtwin {

namespace {

bool write_all(int fd, const char* data, size_t len) {
  size_t at = 0;
  while (at < len) {
    ssize_t n = ::send(fd, data + at, len - at, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    at += static_cast<size_t>(n);
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// ServerConn

bool ServerConn::send(const std::string& bytes) {
  std::lock_guard lk(write_m_);
  if (!open_.load()) return false;
  if (!write_all(fd_, bytes.data(), bytes.size())) {
    open_.store(false);
    return false;
  }
  return true;
}

void ServerConn::close() {
  bool was_open = open_.exchange(false);
  if (was_open) ::shutdown(fd_, SHUT_RDWR);
}

// ---------------------------------------------------------------------------
// TcpLineServer

TcpLineServer::TcpLineServer(int port, Handler handler)
    : requested_port_(port), handler_(std::move(handler)) {}

TcpLineServer::~TcpLineServer() { stop(); }

void TcpLineServer::start() {
  if (running_.load()) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) fail(Errc::bind_failure, std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(requested_port_));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    fail(Errc::bind_failure, "port " + std::to_string(requested_port_) + ": " + why);
  }
  if (::listen(listen_fd_, 64) != 0) {
    std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    fail(Errc::bind_failure, why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  running_.store(true);
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void TcpLineServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    std::lock_guard lk(conns_m_);
    for (auto& [_, conn] : conns_) conn->close();
  }
  for (auto& t : conn_threads_) {
    if (t.joinable()) t.join();
  }
  std::lock_guard lk(conns_m_);
  conns_.clear();
  conn_threads_.clear();
  listen_fd_ = -1;
}

void TcpLineServer::accept_loop() {
  while (running_.load()) {
    sockaddr_in peer{};
    socklen_t len = sizeof(peer);
    int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listener closed
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    auto conn = std::make_shared<ServerConn>();
    conn->fd_ = fd;
    conn->id_ = next_conn_id_.fetch_add(1);
    conn->open_.store(true);
    std::lock_guard lk(conns_m_);
    conns_[conn->id_] = conn;
    conn_threads_.emplace_back([this, conn] { connection_loop(conn); });
  }
}

void TcpLineServer::connection_loop(std::shared_ptr<ServerConn> conn) {
  std::string buf;
  char chunk[4096];
  while (conn->open_.load()) {
    ssize_t n = ::recv(conn->fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      break;
    }
    buf.append(chunk, static_cast<size_t>(n));
    size_t start = 0;
    size_t nl;
    while ((nl = buf.find('\n', start)) != std::string::npos) {
      int64_t receipt_us = steady_us();
      std::string line = buf.substr(start, nl - start);
      start = nl + 1;
      try {
        handler_(conn, line, receipt_us);
      } catch (...) {
        // a handler failure must not take the listener down
        conn->close();
        break;
      }
    }
    buf.erase(0, start);
  }
  conn->close();
  if (on_close_) {
    try {
      on_close_(conn);
    } catch (...) {
    }
  }
  {
    // wait out any in-flight send before releasing the descriptor
    std::lock_guard wk(conn->write_m_);
    ::close(conn->fd_);
    conn->fd_ = -1;
  }
  std::lock_guard lk(conns_m_);
  conns_.erase(conn->id_);
}

// ---------------------------------------------------------------------------
// TcpLineClient

void TcpLineClient::connect(const std::string& host, int port) {
  close();
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail(Errc::connect_failure, std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    fd_ = -1;
    fail(Errc::connect_failure, "bad address " + host);
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    std::string why = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    fail(Errc::connect_failure, host + ":" + std::to_string(port) + ": " + why);
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void TcpLineClient::send(const std::string& bytes) {
  std::lock_guard lk(write_m_);
  if (fd_ < 0) fail(Errc::connect_failure, "not connected");
  if (!write_all(fd_, bytes.data(), bytes.size())) {
    fail(Errc::connect_failure, "connection lost");
  }
}

std::optional<std::string> TcpLineClient::read_line(int timeout_ms) {
  int64_t deadline = steady_us() + static_cast<int64_t>(timeout_ms) * 1000;
  while (true) {
    size_t nl = buf_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      return line;
    }
    if (fd_ < 0) return std::nullopt;
    int64_t left_us = deadline - steady_us();
    if (left_us <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    int pr = ::poll(&p, 1, static_cast<int>(left_us / 1000) + 1);
    if (pr <= 0) {
      if (pr < 0 && errno == EINTR) continue;
      return std::nullopt;
    }
    char chunk[4096];
    ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      ::close(fd_);
      fd_ = -1;
      return std::nullopt;
    }
    buf_.append(chunk, static_cast<size_t>(n));
  }
}

MirrorMessage TcpLineClient::request(const MirrorMessage& msg, int timeout_ms) {
  send(encode_message(msg));
  auto line = read_line(timeout_ms);
  if (!line) fail(Errc::connect_failure, "no reply within deadline");
  return decode_message(*line);
}

void TcpLineClient::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
  buf_.clear();
}

}  // namespace dtwin
