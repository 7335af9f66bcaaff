#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "nlohmann/json.hpp"

#include "dtwin/common.hpp"

namespace dtwin {

// Wire kinds are a closed set; anything else is rejected at decode time.
enum class MessageKind {
  state_update,
  flow_summary,
  action,
  classify_request,
  classify_response,
  model_push,
  ack,
  error,
};

const char* message_kind_name(MessageKind k);

struct MirrorMessage {
  int version = 1;
  MessageKind kind = MessageKind::ack;
  std::string twin_id;
  nlohmann::json payload = nlohmann::json::object();
  int64_t timestamp_ms = 0;

  bool operator==(const MirrorMessage& other) const = default;
};

// One UTF-8 line per message, newline terminated, no embedded newlines.
// NaN or infinity anywhere in the payload is unserializable.
std::string encode_message(const MirrorMessage& msg);

// Total on arbitrary bytes: returns the message or throws MalformedMessage /
// UnsupportedVersion / UnknownKind; never crashes.
MirrorMessage decode_message(std::string_view line);

enum class ActionKind { quarantine, shutdown };

const char* action_kind_name(ActionKind a);

// Mitigation command sent fog -> device when a node is judged compromised.
struct ActionCommand {
  std::string twin_id;
  ActionKind action = ActionKind::quarantine;
  std::string reason;
};

MirrorMessage action_to_message(const ActionCommand& cmd, int64_t timestamp_ms);

// default port assignments
constexpr int kMirrorPort = 7700;
constexpr int kDataClassifierPort = 7701;
constexpr int kNetClassifierPort = 7702;
constexpr int kModelPushPort = 7703;

}  // namespace dtwin
