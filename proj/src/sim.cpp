#include "dtwin/sim.hpp"

#include <chrono>
#include <thread>

#include "dtwin/net.hpp"

namespace dtwin {

using json = nlohmann::json;

const char* node_behavior_name(NodeBehavior b) {
  switch (b) {
    case NodeBehavior::benign: return "benign";
    case NodeBehavior::data_anomalous: return "data_anomalous";
    case NodeBehavior::intrusive: return "intrusive";
    case NodeBehavior::mixed: return "mixed";
  }
  return "unknown";
}

NodeBehavior node_behavior_from_name(const std::string& name) {
  if (name == "benign") return NodeBehavior::benign;
  if (name == "data_anomalous" || name == "anomalous") return NodeBehavior::data_anomalous;
  if (name == "intrusive") return NodeBehavior::intrusive;
  if (name == "mixed") return NodeBehavior::mixed;
  fail(Errc::invalid_rate, "unknown node behavior: " + name);
}

NodeSimulator::NodeSimulator(NodeProfile profile, std::string host, int port)
    : profile_(std::move(profile)), host_(std::move(host)), port_(port) {}

std::string NodeSimulator::twin_id_for(const TwinDefinition& def) {
  auto it = def.attributes.find("serialno");
  if (it == def.attributes.end()) {
    fail(Errc::malformed_config, "simulated nodes need a serialno attribute");
  }
  return def.definition_id + "/" + it->second;
}

NodeRunSummary NodeSimulator::run_for(double seconds) {
  if (profile_.period_s <= 0.0) fail(Errc::invalid_rate, "emission period must be > 0");
  NodeRunSummary summary;
  summary.twin_id = twin_id_for(profile_.twin);

  TcpLineClient client;
  client.connect(host_, port_);  // throws ConnectFailure

  Rng rng(profile_.seed);
  NodeMode mode = NodeMode::running;

  using clock = std::chrono::steady_clock;
  auto start = clock::now();
  auto end = start + std::chrono::duration_cast<clock::duration>(
                         std::chrono::duration<double>(seconds));
  auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(profile_.period_s));

  auto handle_action = [&](const MirrorMessage& msg) {
    ++summary.actions_received;
    std::string action = msg.payload.value("action", "");
    if (action == "quarantine") {
      mode = NodeMode::quarantined;  // a compromised node keeps trying
    } else if (action == "shutdown") {
      mode = NodeMode::shutdown;
    }
    MirrorMessage ack;
    ack.kind = MessageKind::ack;
    ack.twin_id = summary.twin_id;
    ack.payload = {{"action", action}, {"status", "applied"}};
    ack.timestamp_ms = now_ms();
    client.send(encode_message(ack));
  };

  uint64_t k = 1;
  while (!stop_.load() && mode != NodeMode::shutdown) {
    auto next = start + k * period;
    if (next > end) break;

    // idle until the next emission, reacting to any action pushed meanwhile
    while (clock::now() < next && !stop_.load() && mode != NodeMode::shutdown) {
      auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(next - clock::now()).count();
      if (left <= 0) break;
      auto line = client.read_line(static_cast<int>(left));
      if (!line) continue;
      try {
        MirrorMessage msg = decode_message(*line);
        if (msg.kind == MessageKind::action) handle_action(msg);
      } catch (const Error&) {
      }
    }
    if (stop_.load() || mode == NodeMode::shutdown) break;

    double t_s = static_cast<double>(k) * profile_.period_s;
    bool anomalous_window =
        (profile_.behavior == NodeBehavior::data_anomalous ||
         profile_.behavior == NodeBehavior::mixed) &&
        t_s >= profile_.onset_s && t_s < profile_.onset_s + profile_.duration_s;
    AnomlSample sample = anomalous_window ? anoml_anomalous_sample(rng) : anoml_benign_sample(rng);
    summary.emitted.push_back(sample);

    MirrorMessage update;
    update.kind = MessageKind::state_update;
    update.twin_id = summary.twin_id;
    update.payload = {{"features",
                       {{"temperature", sample.temperature},
                        {"humidity", sample.humidity},
                        {"light", sample.light},
                        {"loudness", sample.loudness}}}};
    update.timestamp_ms = now_ms();
    client.send(encode_message(update));
    ++summary.sent;

    // the reply may be preceded by an asynchronous action line
    bool replied = false;
    while (!replied) {
      auto line = client.read_line(5000);
      if (!line) break;
      MirrorMessage msg;
      try {
        msg = decode_message(*line);
      } catch (const Error&) {
        break;
      }
      switch (msg.kind) {
        case MessageKind::action:
          handle_action(msg);
          break;
        case MessageKind::ack:
          ++summary.acked;
          replied = true;
          break;
        case MessageKind::error: {
          std::string code = msg.payload.value("code", "");
          if (code == errc_name(Errc::quarantined_twin)) ++summary.refused;
          else ++summary.errors;
          replied = true;
          break;
        }
        default:
          break;
      }
    }
    ++k;
  }

  summary.final_mode = mode;
  return summary;
}

GatewaySimulator::GatewaySimulator(std::vector<NodeProfile> profiles, std::string host, int port,
                                   double window_s)
    : profiles_(std::move(profiles)), host_(std::move(host)), port_(port), window_s_(window_s) {}

GatewayRunSummary GatewaySimulator::run_for(double seconds) {
  if (window_s_ <= 0.0) fail(Errc::invalid_rate, "window must be > 0");
  GatewayRunSummary summary;

  TcpLineClient client;
  client.connect(host_, port_);

  std::vector<Rng> rngs;
  rngs.reserve(profiles_.size());
  for (const auto& p : profiles_) rngs.push_back(Rng(p.seed).split(0x6774));

  using clock = std::chrono::steady_clock;
  auto start = clock::now();
  auto window = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(window_s_));

  static const char* kAttackTypes[] = {"Scan", "DoS", "Mirai", "MITM_ARP_Spoofing"};

  for (uint64_t k = 1; static_cast<double>(k) * window_s_ <= seconds; ++k) {
    std::this_thread::sleep_until(start + k * window);
    if (stop_.load()) break;
    ++summary.windows;
    double t_s = static_cast<double>(k) * window_s_;

    for (size_t i = 0; i < profiles_.size(); ++i) {
      const NodeProfile& p = profiles_[i];
      std::string twin_id = NodeSimulator::twin_id_for(p.twin);
      bool attacking = (p.behavior == NodeBehavior::intrusive ||
                        p.behavior == NodeBehavior::mixed) &&
                       t_s >= p.onset_s && t_s < p.onset_s + p.duration_s;
      std::map<std::string, double> flow =
          attacking ? iotid20_attack_flow(rngs[i], kAttackTypes[rngs[i].index(4)])
                    : iotid20_benign_flow(rngs[i]);

      MirrorMessage msg;
      msg.kind = MessageKind::flow_summary;
      msg.twin_id = twin_id;
      json features = json::object();
      for (const auto& [name, value] : flow) features[name] = value;
      msg.payload = {{"features", std::move(features)}, {"window_s", window_s_}};
      msg.timestamp_ms = now_ms();

      try {
        MirrorMessage reply = client.request(msg, 5000);
        ++summary.sent;
        ++summary.sent_per_twin[twin_id];
        if (reply.kind == MessageKind::ack) {
          ++summary.acked;
        } else if (reply.kind == MessageKind::error &&
                   reply.payload.value("code", "") == errc_name(Errc::quarantined_twin)) {
          ++summary.refused;
        }
      } catch (const Error&) {
        ++summary.sent;
        ++summary.sent_per_twin[twin_id];
      }
    }
  }
  return summary;
}

}  // namespace dtwin
