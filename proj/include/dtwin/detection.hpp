#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "dtwin/data.hpp"
#include "dtwin/mirror.hpp"
#include "dtwin/ml.hpp"
#include "dtwin/net.hpp"

namespace dtwin {

enum class VerdictKind { data_anomaly, network_intrusion };

const char* verdict_kind_name(VerdictKind k);

struct Verdict {
  std::string twin_id;
  VerdictKind kind = VerdictKind::data_anomaly;
  int label = 0;
  double score = 0.0;
  double latency_ms = 0.0;  // fog-side: wire receipt -> result received
  uint64_t model_version = 0;
  int64_t timestamp_ms = 0;
};

enum class NodeState { normal, suspected_data_anomaly, suspected_intrusion, compromised };

const char* node_state_name(NodeState s);

struct NodeStatus {
  std::string twin_id;
  NodeState state = NodeState::normal;
  std::optional<Verdict> data_verdict;
  std::optional<Verdict> net_verdict;
  int64_t updated_ms = 0;
};

// OR-fusion over present verdicts; a missing side is absent evidence, not a
// benign vote. Throws NoVerdicts when both sides are absent.
NodeStatus fuse(const std::optional<Verdict>& data_v, const std::optional<Verdict>& net_v);

// which side(s) fired, for reason strings and logs
NodeState firing_side(const NodeStatus& status);

// --------------------------------------------------------------------------
// Model serving

struct ServedModel {
  TrainedModel model;
  uint64_t version = 0;
  std::string source_path;  // model file backing this version, when known
};

// Atomically swappable serving slot. Readers take a consistent snapshot of
// (model, preprocessor, version); a swap is all-or-nothing.
class ModelSlot {
 public:
  ModelSlot(std::string kind_label, std::string expected_schema)
      : kind_label_(std::move(kind_label)), expected_schema_(std::move(expected_schema)) {}

  // Returns the previous version (nullopt on cold start). Throws
  // SchemaMismatch when the model does not fit the slot's schema; the old
  // model keeps serving.
  std::optional<uint64_t> swap(TrainedModel model, std::string source_path = "");

  std::shared_ptr<const ServedModel> current() const;
  const std::string& kind_label() const { return kind_label_; }
  const std::string& expected_schema() const { return expected_schema_; }

 private:
  // plain mutex: the critical sections only exchange a shared_ptr, and a
  // reader-preferring rwlock would let spinning classifiers starve a swap
  std::string kind_label_;
  std::string expected_schema_;
  mutable std::mutex m_;
  std::shared_ptr<const ServedModel> served_;
  uint64_t next_version_ = 1;
};

// TCP classifier endpoint: answers classify_request lines with label, score,
// model version and server-side classify time. In unloaded mode every
// request re-reads the model file inside the request, reproducing a cold
// serving path.
class ModelEndpoint {
 public:
  ModelEndpoint(ModelSlot& slot, int port);
  ~ModelEndpoint();

  void start();
  void stop();
  int port() const { return server_.port(); }
  void set_unloaded(bool unloaded) { unloaded_.store(unloaded); }

 private:
  void handle_line(const std::shared_ptr<ServerConn>& conn, const std::string& line, int64_t);

  ModelSlot& slot_;
  std::atomic<bool> unloaded_{false};
  TcpLineServer server_;
};

// TCP listener for model_push messages; routes each pushed model file into
// the slot for its kind and acks with the new version.
class PushListener {
 public:
  PushListener(ModelSlot& data_slot, ModelSlot& net_slot, int port,
               std::string spool_dir = "");
  ~PushListener();

  void start();
  void stop();
  int port() const { return server_.port(); }

 private:
  void handle_line(const std::shared_ptr<ServerConn>& conn, const std::string& line, int64_t);

  ModelSlot& data_slot_;
  ModelSlot& net_slot_;
  std::string spool_dir_;
  TcpLineServer server_;
};

// --------------------------------------------------------------------------
// Behavior forwarding (fog -> cloud ground truth)

// Appends one encoded record per line through a write function. When the
// store is down, events queue in a bounded buffer (drop-oldest past the cap)
// and flush once the store returns.
class BehaviorForwarder {
 public:
  using WriteFn = std::function<bool(const std::string& line)>;  // false = store down

  explicit BehaviorForwarder(WriteFn write, size_t buffer_cap = 10000);
  // appends lines to a file; creates parent directories up front
  static WriteFn file_sink(const std::string& path);

  // returns true when the record reached the store (possibly after flushing)
  bool append(const Record& r);
  void flush();

  size_t buffered() const;
  uint64_t dropped() const;
  uint64_t appended() const;

 private:
  bool try_write(const std::string& line);

  WriteFn write_;
  size_t cap_;
  mutable std::mutex m_;
  std::deque<std::string> buffer_;
  uint64_t dropped_ = 0;
  uint64_t appended_ = 0;
};

// --------------------------------------------------------------------------
// Detection pipeline

struct DetectionConfig {
  std::string data_schema = "anoml_iot";
  std::string net_schema = "iotid20";
  double freshness_window_s = 60.0;  // fuse with the other side's verdict this recent
  ActionKind compromised_action = ActionKind::quarantine;
  bool endpoint_mode = true;  // classify over TCP; false = in-process predict
  std::string classifier_host = "127.0.0.1";
  int data_port = kDataClassifierPort;
  int net_port = kNetClassifierPort;
};

// Fog-side pipeline: builds feature vectors from twin state, obtains verdicts
// from the classifier endpoints, fuses them per twin, dispatches mitigation
// actions, and forwards observed behavior to the ground-truth logs.
class DetectionService : public MirrorSink {
 public:
  DetectionService(TwinRegistry& registry, DetectionConfig config, ModelSlot& data_slot,
                   ModelSlot& net_slot);

  void set_action_transport(std::function<void(const ActionCommand&)> fn);
  void set_sensor_log(BehaviorForwarder* log) { sensor_log_ = log; }
  void set_network_log(BehaviorForwarder* log) { network_log_ = log; }

  // MirrorSink
  void on_sensor_update(const TwinSnapshot& snapshot, const std::vector<StateChangeEvent>& events,
                        int64_t receipt_us) override;
  void on_flow_summary(const std::string& twin_id, const std::map<std::string, double>& features,
                       int64_t timestamp_ms, int64_t receipt_us) override;
  void on_release(const std::string& twin_id) override;

  // observation hooks
  void on_verdict(std::function<void(const Verdict&)> fn);
  void on_status(std::function<void(const NodeStatus&)> fn);
  std::optional<Verdict> wait_verdict(int timeout_ms);
  NodeStatus status_of(const std::string& twin_id) const;

  uint64_t actions_dispatched() const { return actions_dispatched_.load(); }
  uint64_t no_model_events() const { return no_model_events_.load(); }
  uint64_t classify_failures() const { return classify_failures_.load(); }

 private:
  struct FusionEntry {
    std::optional<Verdict> data_verdict;
    std::optional<Verdict> net_verdict;
    int64_t data_at_us = 0;
    int64_t net_at_us = 0;
    NodeStatus last_status;
  };

  Verdict classify(VerdictKind kind, const std::string& twin_id, const Eigen::VectorXd& x,
                   int64_t receipt_us, int64_t timestamp_ms);
  void record_verdict(const Verdict& v);
  void forward(BehaviorForwarder* log, const Record& r);

  TwinRegistry& registry_;
  DetectionConfig config_;
  ModelSlot& data_slot_;
  ModelSlot& net_slot_;
  std::function<void(const ActionCommand&)> action_transport_;
  BehaviorForwarder* sensor_log_ = nullptr;
  BehaviorForwarder* network_log_ = nullptr;

  mutable std::mutex fusion_m_;
  std::map<std::string, FusionEntry> fusion_;

  std::mutex observers_m_;
  std::vector<std::function<void(const Verdict&)>> verdict_observers_;
  std::vector<std::function<void(const NodeStatus&)>> status_observers_;
  std::condition_variable verdict_cv_;
  std::deque<Verdict> verdict_queue_;

  std::atomic<uint64_t> actions_dispatched_{0};
  std::atomic<uint64_t> no_model_events_{0};
  std::atomic<uint64_t> classify_failures_{0};
};

// Builds the record a sensor snapshot mirrors, in the schema's column order.
// Categorical columns may carry pre-encoded numeric codes.
Record record_from_snapshot(const Schema& schema, const TwinSnapshot& snapshot,
                            int64_t timestamp_ms);
Record record_from_flow(const Schema& schema, const std::string& twin_id,
                        const std::map<std::string, double>& features, int64_t timestamp_ms);

}  // namespace dtwin
