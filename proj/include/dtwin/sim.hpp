#pragma once

#include <atomic>
#include <map>
#include <string>
#include <vector>

#include "dtwin/data.hpp"
#include "dtwin/twin.hpp"

namespace dtwin {

enum class NodeBehavior { benign, data_anomalous, intrusive, mixed };

const char* node_behavior_name(NodeBehavior b);
NodeBehavior node_behavior_from_name(const std::string& name);

// Software stand-in for one sensor node: polls its (synthetic) sensors every
// period and mirrors them to the fog. The behavior windows are deterministic
// under the seed.
struct NodeProfile {
  TwinDefinition twin;
  double period_s = 1.0;
  NodeBehavior behavior = NodeBehavior::benign;
  double onset_s = 10.0;     // anomalous / intrusive window start
  double duration_s = 1e9;   // window length
  uint64_t seed = 0;
};

enum class NodeMode { running, quarantined, shutdown };

struct NodeRunSummary {
  std::string twin_id;
  uint64_t sent = 0;
  uint64_t acked = 0;
  uint64_t refused = 0;  // rejected with QuarantinedTwin
  uint64_t errors = 0;   // any other error reply
  uint64_t actions_received = 0;
  NodeMode final_mode = NodeMode::running;
  std::vector<AnomlSample> emitted;  // value sequence, for determinism checks
};

class NodeSimulator {
 public:
  NodeSimulator(NodeProfile profile, std::string host, int port);

  // Blocking run: connects (ConnectFailure), emits for the given wall-clock
  // span, honors quarantine (keeps polling, counts refusals) and shutdown
  // (stops emitting).
  NodeRunSummary run_for(double seconds);
  void request_stop() { stop_.store(true); }

  static std::string twin_id_for(const TwinDefinition& def);

 private:
  NodeProfile profile_;
  std::string host_;
  int port_;
  std::atomic<bool> stop_{false};
};

struct GatewayRunSummary {
  uint64_t windows = 0;
  uint64_t sent = 0;
  uint64_t acked = 0;
  uint64_t refused = 0;
  std::map<std::string, uint64_t> sent_per_twin;
};

// Stand-in for the IoT gateway: every window it reports one flow summary per
// node, drawn from benign or attack traffic signatures depending on the
// node's behavior.
class GatewaySimulator {
 public:
  GatewaySimulator(std::vector<NodeProfile> profiles, std::string host, int port,
                   double window_s = 10.0);

  GatewayRunSummary run_for(double seconds);
  void request_stop() { stop_.store(true); }

 private:
  std::vector<NodeProfile> profiles_;
  std::string host_;
  int port_;
  double window_s_;
  std::atomic<bool> stop_{false};
};

}  // namespace dtwin
