#include <cmath>

#include "dtwin/protocol.hpp"

namespace dtwin {

using json = nlohmann::json;

const char* message_kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::state_update: return "state_update";
    case MessageKind::flow_summary: return "flow_summary";
    case MessageKind::action: return "action";
    case MessageKind::classify_request: return "classify_request";
    case MessageKind::classify_response: return "classify_response";
    case MessageKind::model_push: return "model_push";
    case MessageKind::ack: return "ack";
    case MessageKind::error: return "error";
  }
  return "unknown";
}

namespace {

bool kind_from_name(std::string_view name, MessageKind& out) {
  for (MessageKind k :
       {MessageKind::state_update, MessageKind::flow_summary, MessageKind::action,
        MessageKind::classify_request, MessageKind::classify_response, MessageKind::model_push,
        MessageKind::ack, MessageKind::error}) {
    if (name == message_kind_name(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

void reject_non_finite(const json& j) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    fail(Errc::unserializable_value, "payload contains NaN or infinity");
  }
  if (j.is_object() || j.is_array()) {
    for (const auto& child : j) reject_non_finite(child);
  }
}

}  // namespace

std::string encode_message(const MirrorMessage& msg) {
  if (msg.version != 1) fail(Errc::unsupported_version, std::to_string(msg.version));
  if (!msg.payload.is_object()) {
    fail(Errc::unserializable_value, "payload must be a JSON object");
  }
  reject_non_finite(msg.payload);
  json j;
  j["version"] = msg.version;
  j["kind"] = message_kind_name(msg.kind);
  j["twin_id"] = msg.twin_id;
  j["payload"] = msg.payload;
  j["timestamp"] = msg.timestamp_ms;
  // dump() escapes control characters, so the line stays newline-free
  return j.dump() + "\n";
}

MirrorMessage decode_message(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.remove_suffix(1);
  }
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    fail(Errc::malformed_message, "not a JSON object line");
  }

  auto version_it = j.find("version");
  if (version_it == j.end() || !version_it->is_number_integer()) {
    fail(Errc::malformed_message, "missing integer version");
  }
  if (version_it->get<int64_t>() != 1) {
    fail(Errc::unsupported_version, version_it->dump());
  }

  auto kind_it = j.find("kind");
  if (kind_it == j.end() || !kind_it->is_string()) {
    fail(Errc::malformed_message, "missing kind");
  }
  MirrorMessage msg;
  if (!kind_from_name(kind_it->get<std::string>(), msg.kind)) {
    fail(Errc::unknown_kind, kind_it->get<std::string>());
  }

  if (auto it = j.find("twin_id"); it != j.end()) {
    if (!it->is_string()) fail(Errc::malformed_message, "twin_id must be a string");
    msg.twin_id = it->get<std::string>();
  }
  if (auto it = j.find("payload"); it != j.end()) {
    if (!it->is_object()) fail(Errc::malformed_message, "payload must be an object");
    msg.payload = *it;
  }
  if (auto it = j.find("timestamp"); it != j.end()) {
    if (!it->is_number()) fail(Errc::malformed_message, "timestamp must be a number");
    msg.timestamp_ms = it->get<int64_t>();
  }
  return msg;
}

const char* action_kind_name(ActionKind a) {
  switch (a) {
    case ActionKind::quarantine: return "quarantine";
    case ActionKind::shutdown: return "shutdown";
  }
  return "unknown";
}

MirrorMessage action_to_message(const ActionCommand& cmd, int64_t timestamp_ms) {
  MirrorMessage msg;
  msg.kind = MessageKind::action;
  msg.twin_id = cmd.twin_id;
  msg.payload = {{"action", action_kind_name(cmd.action)}, {"reason", cmd.reason}};
  msg.timestamp_ms = timestamp_ms;
  return msg;
}

}  // namespace dtwin
