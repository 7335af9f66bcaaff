#include "dtwin/mirror.hpp"

namespace dtwin {

using json = nlohmann::json;

MirrorServer::MirrorServer(TwinRegistry& registry, int port, MirrorSink* sink)
    : registry_(registry),
      sink_(sink),
      server_(port, [this](const std::shared_ptr<ServerConn>& conn, const std::string& line,
                           int64_t receipt_us) { handle_line(conn, line, receipt_us); }) {}

MirrorServer::~MirrorServer() { stop(); }

void MirrorServer::start() { server_.start(); }

void MirrorServer::stop() { server_.stop(); }

void MirrorServer::reply_error(ServerConn& conn, const std::string& twin_id, const Error& e) {
  MirrorMessage reply;
  reply.kind = MessageKind::error;
  reply.twin_id = twin_id;
  reply.payload = {{"code", errc_name(e.code())}, {"message", e.what()}};
  reply.timestamp_ms = now_ms();
  conn.send(encode_message(reply));
}

void MirrorServer::handle_line(const std::shared_ptr<ServerConn>& conn, const std::string& line,
                               int64_t receipt_us) {
  MirrorMessage msg;
  try {
    msg = decode_message(line);
  } catch (const Error& e) {
    // a bad line gets an error reply; the connection stays usable
    reply_error(*conn, "", e);
    return;
  }
  try {
    switch (msg.kind) {
      case MessageKind::state_update:
        handle_state_update(conn, msg, receipt_us);
        break;
      case MessageKind::flow_summary:
        handle_flow_summary(*conn, msg, receipt_us);
        break;
      case MessageKind::action:
        handle_action(*conn, msg);
        break;
      case MessageKind::ack:
        handle_ack(msg);
        break;
      case MessageKind::error:
        break;  // device-side complaint; nothing to apply
      default:
        fail(Errc::malformed_message,
             std::string(message_kind_name(msg.kind)) + " is not accepted on the mirror endpoint");
    }
  } catch (const Error& e) {
    reply_error(*conn, msg.twin_id, e);
  }
}

void MirrorServer::handle_state_update(const std::shared_ptr<ServerConn>& conn,
                                       const MirrorMessage& msg, int64_t receipt_us) {
  TwinSnapshot before = registry_.get_twin(msg.twin_id);  // throws UnknownTwin

  json features = msg.payload.value("features", json::object());
  if (!features.is_object()) fail(Errc::malformed_message, "features must be an object");

  if (features.empty()) {
    // read probe: nothing applied, revision unchanged
    MirrorMessage reply;
    reply.kind = MessageKind::ack;
    reply.twin_id = msg.twin_id;
    json values = json::object();
    for (const auto& [name, st] : before.feature_values) values[name] = st.value;
    reply.payload = {{"revision", before.revision},
                     {"values", std::move(values)},
                     {"quarantined", before.quarantined},
                     {"definition", before.definition.definition_id}};
    reply.timestamp_ms = now_ms();
    conn->send(encode_message(reply));
    return;
  }

  for (const auto& [name, value] : features.items()) {
    if (!before.definition.has_feature(name)) fail(Errc::unknown_feature, name);
    if (!value.is_number()) fail(Errc::malformed_message, "feature " + name + " must be numeric");
  }
  if (before.quarantined) fail(Errc::quarantined_twin, msg.twin_id);

  // the sender becomes the device connection for this twin
  {
    std::lock_guard lk(devices_m_);
    device_conns_[msg.twin_id] = conn;
  }

  std::vector<StateChangeEvent> events;
  for (const auto& [name, value] : features.items()) {
    events.push_back(
        registry_.update_feature(msg.twin_id, name, value.get<double>(), msg.timestamp_ms));
  }

  TwinSnapshot after = registry_.get_twin(msg.twin_id);
  MirrorMessage reply;
  reply.kind = MessageKind::ack;
  reply.twin_id = msg.twin_id;
  reply.payload = {{"revision", events.back().revision}};
  reply.timestamp_ms = now_ms();
  conn->send(encode_message(reply));

  if (sink_) sink_->on_sensor_update(after, events, receipt_us);
}

void MirrorServer::handle_flow_summary(ServerConn& conn, const MirrorMessage& msg,
                                       int64_t receipt_us) {
  TwinSnapshot snap = registry_.get_twin(msg.twin_id);
  if (snap.quarantined) fail(Errc::quarantined_twin, msg.twin_id);

  json features = msg.payload.value("features", json::object());
  if (!features.is_object() || features.empty()) {
    fail(Errc::malformed_message, "flow summary needs a features object");
  }
  std::map<std::string, double> flow;
  for (const auto& [name, value] : features.items()) {
    if (!value.is_number()) fail(Errc::malformed_message, "flow feature " + name + " not numeric");
    flow[name] = value.get<double>();
  }

  MirrorMessage reply;
  reply.kind = MessageKind::ack;
  reply.twin_id = msg.twin_id;
  reply.payload = {{"revision", snap.revision}};
  reply.timestamp_ms = now_ms();
  conn.send(encode_message(reply));

  if (sink_) sink_->on_flow_summary(msg.twin_id, flow, msg.timestamp_ms, receipt_us);
}

void MirrorServer::handle_action(ServerConn& conn, const MirrorMessage& msg) {
  std::string action = msg.payload.value("action", "");
  if (action != "release") {
    fail(Errc::malformed_message, "only action=release may be sent to the fog");
  }
  if (!registry_.exists(msg.twin_id)) fail(Errc::unknown_twin, msg.twin_id);
  registry_.set_quarantined(msg.twin_id, false);
  if (sink_) sink_->on_release(msg.twin_id);

  MirrorMessage reply;
  reply.kind = MessageKind::ack;
  reply.twin_id = msg.twin_id;
  reply.payload = {{"released", true}};
  reply.timestamp_ms = now_ms();
  conn.send(encode_message(reply));
}

void MirrorServer::handle_ack(const MirrorMessage& msg) {
  if (!msg.payload.contains("action")) return;
  std::lock_guard lk(devices_m_);
  ++action_acks_[msg.twin_id];
}

void MirrorServer::send_action(const ActionCommand& cmd) {
  std::shared_ptr<ServerConn> conn;
  {
    std::lock_guard lk(devices_m_);
    auto it = device_conns_.find(cmd.twin_id);
    if (it != device_conns_.end()) conn = it->second.lock();
  }
  if (!conn || !conn->open()) {
    fail(Errc::device_unreachable, "no live connection for " + cmd.twin_id);
  }
  if (!conn->send(encode_message(action_to_message(cmd, now_ms())))) {
    fail(Errc::device_unreachable, "write failed for " + cmd.twin_id);
  }
  actions_sent_.fetch_add(1);
}

uint64_t MirrorServer::action_acks(const std::string& twin_id) const {
  std::lock_guard lk(devices_m_);
  auto it = action_acks_.find(twin_id);
  return it != action_acks_.end() ? it->second : 0;
}

}  // namespace dtwin
