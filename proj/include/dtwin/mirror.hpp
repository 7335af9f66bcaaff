#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dtwin/net.hpp"
#include "dtwin/twin.hpp"

namespace dtwin {

// Consumer of mirrored state on the fog side. Calls arrive on connection
// threads: per twin in order, across twins concurrently.
class MirrorSink {
 public:
  virtual ~MirrorSink() = default;
  virtual void on_sensor_update(const TwinSnapshot& snapshot,
                                const std::vector<StateChangeEvent>& events,
                                int64_t receipt_us) = 0;
  virtual void on_flow_summary(const std::string& twin_id,
                               const std::map<std::string, double>& features, int64_t timestamp_ms,
                               int64_t receipt_us) = 0;
  virtual void on_release(const std::string& twin_id) {}
};

// The fog's twin mirroring endpoint. Devices and the gateway push
// state_update / flow_summary lines and get a per-message ack echoing the
// twin revision; action commands travel back over the device's own
// connection. An operator client may send action{release} to lift a
// quarantine. A state_update with no features is a read probe: the ack
// carries the full snapshot and nothing is applied.
class MirrorServer {
 public:
  MirrorServer(TwinRegistry& registry, int port, MirrorSink* sink = nullptr);
  ~MirrorServer();

  void start();
  void stop();
  int port() const { return server_.port(); }

  // Delivers one action command to the device connection that owns the twin.
  void send_action(const ActionCommand& cmd);  // throws DeviceUnreachable

  uint64_t actions_sent() const { return actions_sent_.load(); }
  uint64_t action_acks(const std::string& twin_id) const;

 private:
  void handle_line(const std::shared_ptr<ServerConn>& conn, const std::string& line,
                   int64_t receipt_us);
  void reply_error(ServerConn& conn, const std::string& twin_id, const Error& e);
  void handle_state_update(const std::shared_ptr<ServerConn>& conn, const MirrorMessage& msg,
                           int64_t receipt_us);
  void handle_flow_summary(ServerConn& conn, const MirrorMessage& msg, int64_t receipt_us);
  void handle_action(ServerConn& conn, const MirrorMessage& msg);
  void handle_ack(const MirrorMessage& msg);

  TwinRegistry& registry_;
  MirrorSink* sink_;
  TcpLineServer server_;

  mutable std::mutex devices_m_;
  std::map<std::string, std::weak_ptr<ServerConn>> device_conns_;  // twin -> connection
  std::map<std::string, uint64_t> action_acks_;
  std::atomic<uint64_t> actions_sent_{0};
};

}  // namespace dtwin
