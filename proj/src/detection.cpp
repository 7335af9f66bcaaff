#include "dtwin/detection.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace dtwin {

using json = nlohmann::json;

const char* verdict_kind_name(VerdictKind k) {
  return k == VerdictKind::data_anomaly ? "data_anomaly" : "network_intrusion";
}

const char* node_state_name(NodeState s) {
  switch (s) {
    case NodeState::normal: return "normal";
    case NodeState::suspected_data_anomaly: return "suspected_data_anomaly";
    case NodeState::suspected_intrusion: return "suspected_intrusion";
    case NodeState::compromised: return "compromised";
  }
  return "unknown";
}

NodeStatus fuse(const std::optional<Verdict>& data_v, const std::optional<Verdict>& net_v) {
  if (!data_v && !net_v) fail(Errc::no_verdicts, "fusion needs at least one verdict");
  NodeStatus status;
  status.twin_id = data_v ? data_v->twin_id : net_v->twin_id;
  status.data_verdict = data_v;
  status.net_verdict = net_v;
  bool positive = (data_v && data_v->label == 1) || (net_v && net_v->label == 1);
  status.state = positive ? NodeState::compromised : NodeState::normal;
  status.updated_ms = now_ms();
  return status;
}

NodeState firing_side(const NodeStatus& status) {
  bool data_fired = status.data_verdict && status.data_verdict->label == 1;
  bool net_fired = status.net_verdict && status.net_verdict->label == 1;
  if (data_fired && net_fired) return NodeState::compromised;
  if (data_fired) return NodeState::suspected_data_anomaly;
  if (net_fired) return NodeState::suspected_intrusion;
  return NodeState::normal;
}

// ---------------------------------------------------------------------------
// ModelSlot

std::optional<uint64_t> ModelSlot::swap(TrainedModel model, std::string source_path) {
  if (!model.preprocessor) {
    fail(Errc::schema_mismatch, "model has no embedded preprocessor and cannot serve");
  }
  if (!expected_schema_.empty() && model.schema != expected_schema_) {
    fail(Errc::schema_mismatch, kind_label_ + " slot expects schema " + expected_schema_ +
                                    ", model was fitted on " + model.schema);
  }
  if (model.fingerprint != model.preprocessor->fingerprint()) {
    fail(Errc::schema_mismatch, "model fingerprint disagrees with its preprocessor");
  }
  if (static_cast<size_t>(model.input_dimension) != model.preprocessor->dimension()) {
    fail(Errc::schema_mismatch,
         "model dimension " + std::to_string(model.input_dimension) + " does not match schema " +
             model.schema + " feature dimension " +
             std::to_string(model.preprocessor->dimension()));
  }

  auto next = std::make_shared<ServedModel>();
  next->model = std::move(model);
  next->source_path = std::move(source_path);

  std::lock_guard lk(m_);
  std::optional<uint64_t> previous;
  if (served_) previous = served_->version;
  next->version = next_version_++;
  served_ = std::move(next);
  return previous;
}

std::shared_ptr<const ServedModel> ModelSlot::current() const {
  std::lock_guard lk(m_);
  return served_;
}

// ---------------------------------------------------------------------------
// ModelEndpoint

ModelEndpoint::ModelEndpoint(ModelSlot& slot, int port)
    : slot_(slot), server_(port, [this](const std::shared_ptr<ServerConn>& conn,
                                        const std::string& line, int64_t receipt_us) {
        handle_line(conn, line, receipt_us);
      }) {}

ModelEndpoint::~ModelEndpoint() { stop(); }

void ModelEndpoint::start() { server_.start(); }
void ModelEndpoint::stop() { server_.stop(); }

void ModelEndpoint::handle_line(const std::shared_ptr<ServerConn>& conn, const std::string& line,
                                int64_t) {
  auto reply_error = [&](const std::string& twin_id, const Error& e) {
    MirrorMessage reply;
    reply.kind = MessageKind::error;
    reply.twin_id = twin_id;
    reply.payload = {{"code", errc_name(e.code())}, {"message", e.what()}};
    reply.timestamp_ms = now_ms();
    conn->send(encode_message(reply));
  };

  MirrorMessage msg;
  try {
    msg = decode_message(line);
  } catch (const Error& e) {
    reply_error("", e);
    return;
  }
  try {
    if (msg.kind != MessageKind::classify_request) {
      fail(Errc::malformed_message, "classifier endpoint accepts classify_request only");
    }
    std::string requested = msg.payload.value("model", "");
    if (requested != slot_.kind_label()) {
      fail(Errc::schema_mismatch,
           "endpoint serves " + slot_.kind_label() + ", request was for " + requested);
    }
    if (!msg.payload.contains("vector") || !msg.payload["vector"].is_array()) {
      fail(Errc::malformed_message, "classify_request needs a vector array");
    }
    Eigen::VectorXd x(msg.payload["vector"].size());
    Eigen::Index i = 0;
    for (const auto& v : msg.payload["vector"]) {
      if (!v.is_number()) fail(Errc::malformed_message, "vector entries must be numeric");
      x[i++] = v.get<double>();
    }

    auto served = slot_.current();
    if (!served) fail(Errc::no_served_model, "no " + slot_.kind_label() + " model is being served");

    int64_t t0 = steady_us();
    Prediction pred;
    if (unloaded_.load() && !served->source_path.empty()) {
      // cold path: the file read and parse land inside the measured window
      TrainedModel cold = load_model(served->source_path);
      pred = cold.predict(x);
    } else {
      pred = served->model.predict(x);
    }
    int64_t classify_us = steady_us() - t0;

    MirrorMessage reply;
    reply.kind = MessageKind::classify_response;
    reply.twin_id = msg.twin_id;
    reply.payload = {{"label", pred.label},
                     {"score", pred.score},
                     {"model_version", served->version},
                     {"classify_us", classify_us}};
    reply.timestamp_ms = now_ms();
    conn->send(encode_message(reply));
  } catch (const Error& e) {
    reply_error(msg.twin_id, e);
  }
}

// ---------------------------------------------------------------------------
// PushListener

PushListener::PushListener(ModelSlot& data_slot, ModelSlot& net_slot, int port,
                           std::string spool_dir)
    : data_slot_(data_slot),
      net_slot_(net_slot),
      spool_dir_(std::move(spool_dir)),
      server_(port, [this](const std::shared_ptr<ServerConn>& conn, const std::string& line,
                           int64_t receipt_us) { handle_line(conn, line, receipt_us); }) {}

PushListener::~PushListener() { stop(); }

void PushListener::start() { server_.start(); }
void PushListener::stop() { server_.stop(); }

void PushListener::handle_line(const std::shared_ptr<ServerConn>& conn, const std::string& line,
                               int64_t) {
  auto reply_error = [&](const Error& e) {
    MirrorMessage reply;
    reply.kind = MessageKind::error;
    reply.payload = {{"code", errc_name(e.code())}, {"message", e.what()}};
    reply.timestamp_ms = now_ms();
    conn->send(encode_message(reply));
  };

  MirrorMessage msg;
  try {
    msg = decode_message(line);
  } catch (const Error& e) {
    reply_error(e);
    return;
  }
  try {
    if (msg.kind != MessageKind::model_push) {
      fail(Errc::malformed_message, "push endpoint accepts model_push only");
    }
    std::string kind = msg.payload.value("kind", "");
    ModelSlot* slot = nullptr;
    if (kind == data_slot_.kind_label()) slot = &data_slot_;
    else if (kind == net_slot_.kind_label()) slot = &net_slot_;
    else fail(Errc::schema_mismatch, "no serving slot for kind " + kind);

    std::string bytes = base64_decode(msg.payload.value("model_b64", ""));
    TrainedModel model = model_from_bytes(bytes);

    // keep the pushed file on disk so the unloaded serving path has a source
    std::string path;
    if (!spool_dir_.empty()) {
      std::filesystem::create_directories(spool_dir_);
      path = spool_dir_ + "/" + kind + ".dtm";
      write_file(path, bytes);
    }
    std::optional<uint64_t> previous = slot->swap(std::move(model), path);

    MirrorMessage reply;
    reply.kind = MessageKind::ack;
    reply.payload = {{"version", slot->current()->version},
                     {"previous", previous ? json(*previous) : json(nullptr)}};
    reply.timestamp_ms = now_ms();
    conn->send(encode_message(reply));
  } catch (const Error& e) {
    reply_error(e);
  }
}

// ---------------------------------------------------------------------------
// BehaviorForwarder

BehaviorForwarder::BehaviorForwarder(WriteFn write, size_t buffer_cap)
    : write_(std::move(write)), cap_(buffer_cap) {}

BehaviorForwarder::WriteFn BehaviorForwarder::file_sink(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  return [path](const std::string& line) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) return false;
    out << line << '\n';
    return static_cast<bool>(out);
  };
}

bool BehaviorForwarder::try_write(const std::string& line) { return write_(line); }

bool BehaviorForwarder::append(const Record& r) {
  std::string line = record_to_line(r);
  std::lock_guard lk(m_);
  // drain older entries first so the store sees events in order
  while (!buffer_.empty()) {
    if (!try_write(buffer_.front())) break;
    buffer_.pop_front();
    ++appended_;
  }
  if (buffer_.empty() && try_write(line)) {
    ++appended_;
    return true;
  }
  buffer_.push_back(std::move(line));
  while (buffer_.size() > cap_) {
    buffer_.pop_front();
    ++dropped_;
  }
  return false;
}

void BehaviorForwarder::flush() {
  std::lock_guard lk(m_);
  while (!buffer_.empty()) {
    if (!try_write(buffer_.front())) break;
    buffer_.pop_front();
    ++appended_;
  }
}

size_t BehaviorForwarder::buffered() const {
  std::lock_guard lk(m_);
  return buffer_.size();
}

uint64_t BehaviorForwarder::dropped() const {
  std::lock_guard lk(m_);
  return dropped_;
}

uint64_t BehaviorForwarder::appended() const {
  std::lock_guard lk(m_);
  return appended_;
}

// ---------------------------------------------------------------------------
// record builders

Record record_from_snapshot(const Schema& schema, const TwinSnapshot& snapshot,
                            int64_t timestamp_ms) {
  Record r;
  r.schema = schema.name;
  r.label = -1;  // labelled later, cloud side
  r.cells.resize(schema.columns.size());
  for (size_t ci = 0; ci < schema.columns.size(); ++ci) {
    const Column& col = schema.columns[ci];
    switch (col.type) {
      case ColumnType::timestamp:
        r.cells[ci] = static_cast<double>(timestamp_ms);
        break;
      case ColumnType::label:
        r.cells[ci] = std::string();
        break;
      default: {
        auto it = snapshot.feature_values.find(col.name);
        if (it == snapshot.feature_values.end()) {
          fail(Errc::schema_mismatch,
               "twin " + snapshot.twin_id + " does not mirror feature " + col.name);
        }
        r.cells[ci] = it->second.value;
      }
    }
  }
  r.origin = snapshot.twin_id;
  r.id = static_cast<int64_t>(snapshot.revision);
  return r;
}

Record record_from_flow(const Schema& schema, const std::string& twin_id,
                        const std::map<std::string, double>& features, int64_t timestamp_ms) {
  Record r;
  r.schema = schema.name;
  r.label = -1;
  r.origin = twin_id;
  r.cells.resize(schema.columns.size());
  for (size_t ci = 0; ci < schema.columns.size(); ++ci) {
    const Column& col = schema.columns[ci];
    switch (col.type) {
      case ColumnType::timestamp:
        r.cells[ci] = static_cast<double>(timestamp_ms);
        break;
      case ColumnType::label:
        r.cells[ci] = std::string();
        break;
      default: {
        auto it = features.find(col.name);
        if (it == features.end()) {
          fail(Errc::schema_mismatch, "flow summary for " + twin_id + " misses " + col.name);
        }
        r.cells[ci] = it->second;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// DetectionService

DetectionService::DetectionService(TwinRegistry& registry, DetectionConfig config,
                                   ModelSlot& data_slot, ModelSlot& net_slot)
    : registry_(registry), config_(std::move(config)), data_slot_(data_slot),
      net_slot_(net_slot) {}

void DetectionService::set_action_transport(std::function<void(const ActionCommand&)> fn) {
  action_transport_ = std::move(fn);
}

void DetectionService::on_verdict(std::function<void(const Verdict&)> fn) {
  std::lock_guard lk(observers_m_);
  verdict_observers_.push_back(std::move(fn));
}

void DetectionService::on_status(std::function<void(const NodeStatus&)> fn) {
  std::lock_guard lk(observers_m_);
  status_observers_.push_back(std::move(fn));
}

std::optional<Verdict> DetectionService::wait_verdict(int timeout_ms) {
  std::unique_lock lk(observers_m_);
  verdict_cv_.wait_for(lk, std::chrono::milliseconds(timeout_ms),
                       [&] { return !verdict_queue_.empty(); });
  if (verdict_queue_.empty()) return std::nullopt;
  Verdict v = verdict_queue_.front();
  verdict_queue_.pop_front();
  return v;
}

NodeStatus DetectionService::status_of(const std::string& twin_id) const {
  std::lock_guard lk(fusion_m_);
  auto it = fusion_.find(twin_id);
  if (it != fusion_.end() && !it->second.last_status.twin_id.empty()) {
    return it->second.last_status;
  }
  NodeStatus st;
  st.twin_id = twin_id;
  st.state = NodeState::normal;
  return st;
}

Verdict DetectionService::classify(VerdictKind kind, const std::string& twin_id,
                                   const Eigen::VectorXd& x, int64_t receipt_us,
                                   int64_t timestamp_ms) {
  ModelSlot& slot = kind == VerdictKind::data_anomaly ? data_slot_ : net_slot_;
  Verdict v;
  v.twin_id = twin_id;
  v.kind = kind;
  v.timestamp_ms = timestamp_ms;

  if (config_.endpoint_mode) {
    // a connection per request keeps distinct twins classifying concurrently
    TcpLineClient client;
    int port = kind == VerdictKind::data_anomaly ? config_.data_port : config_.net_port;
    client.connect(config_.classifier_host, port);
    MirrorMessage req;
    req.kind = MessageKind::classify_request;
    req.twin_id = twin_id;
    json vec = json::array();
    for (Eigen::Index i = 0; i < x.size(); ++i) vec.push_back(x[i]);
    req.payload = {{"model", slot.kind_label()}, {"vector", std::move(vec)}};
    req.timestamp_ms = timestamp_ms;
    MirrorMessage reply = client.request(req, 30000);
    if (reply.kind == MessageKind::error) {
      std::string code = reply.payload.value("code", "");
      if (code == errc_name(Errc::no_served_model)) {
        fail(Errc::no_served_model, reply.payload.value("message", ""));
      }
      fail(Errc::schema_mismatch, reply.payload.value("message", "classification failed"));
    }
    if (reply.kind != MessageKind::classify_response) {
      fail(Errc::malformed_message, "unexpected reply kind from classifier");
    }
    v.label = reply.payload.value("label", 0);
    v.score = reply.payload.value("score", 0.0);
    v.model_version = reply.payload.value("model_version", uint64_t{0});
  } else {
    auto served = slot.current();
    if (!served) fail(Errc::no_served_model, slot.kind_label());
    Prediction pred = served->model.predict(x);
    v.label = pred.label;
    v.score = pred.score;
    v.model_version = served->version;
  }

  v.latency_ms = static_cast<double>(steady_us() - receipt_us) / 1000.0;
  return v;
}

void DetectionService::record_verdict(const Verdict& v) {
  NodeStatus status;
  {
    std::lock_guard lk(fusion_m_);
    FusionEntry& entry = fusion_[v.twin_id];
    int64_t now_us = steady_us();
    auto window_us = static_cast<int64_t>(config_.freshness_window_s * 1e6);
    if (v.kind == VerdictKind::data_anomaly) {
      entry.data_verdict = v;
      entry.data_at_us = now_us;
      if (entry.net_verdict && now_us - entry.net_at_us > window_us) {
        entry.net_verdict.reset();  // stale other side
      }
    } else {
      entry.net_verdict = v;
      entry.net_at_us = now_us;
      if (entry.data_verdict && now_us - entry.data_at_us > window_us) {
        entry.data_verdict.reset();
      }
    }
    status = fuse(entry.data_verdict, entry.net_verdict);
    entry.last_status = status;
  }

  std::vector<std::function<void(const Verdict&)>> verdict_fns;
  std::vector<std::function<void(const NodeStatus&)>> status_fns;
  {
    std::lock_guard lk(observers_m_);
    verdict_queue_.push_back(v);
    verdict_fns = verdict_observers_;
    status_fns = status_observers_;
  }
  verdict_cv_.notify_all();
  for (const auto& fn : verdict_fns) fn(v);
  for (const auto& fn : status_fns) fn(status);

  if (status.state == NodeState::compromised) {
    // quarantine exactly once; further positives while quarantined are quiet
    bool already = registry_.quarantined(v.twin_id);
    if (!already) {
      registry_.set_quarantined(v.twin_id, true);
      ActionCommand cmd;
      cmd.twin_id = v.twin_id;
      cmd.action = config_.compromised_action;
      cmd.reason = std::string(node_state_name(firing_side(status))) + " " +
                   verdict_kind_name(v.kind) + " score=" + std::to_string(v.score);
      actions_dispatched_.fetch_add(1);
      if (action_transport_) {
        try {
          action_transport_(cmd);
        } catch (const Error& e) {
          fprintf(stderr, "action delivery for %s failed: %s\n", cmd.twin_id.c_str(), e.what());
        }
      }
    }
  }
}

void DetectionService::forward(BehaviorForwarder* log, const Record& r) {
  if (log) log->append(r);
}

void DetectionService::on_sensor_update(const TwinSnapshot& snapshot,
                                        const std::vector<StateChangeEvent>& events,
                                        int64_t receipt_us) {
  int64_t ts = events.empty() ? now_ms() : events.back().timestamp_ms;
  const Schema& schema = schema_by_name(config_.data_schema);
  Record observed;
  try {
    observed = record_from_snapshot(schema, snapshot, ts);
  } catch (const Error&) {
    // twin does not mirror what the served schema needs
    classify_failures_.fetch_add(1);
    return;
  }

  auto served = data_slot_.current();
  if (!served) {
    // degraded mode: no model yet, but behavior still reaches the cloud log
    no_model_events_.fetch_add(1);
    forward(sensor_log_, observed);
    return;
  }
  try {
    Eigen::VectorXd x = served->model.preprocessor->transform(observed);
    Verdict v = classify(VerdictKind::data_anomaly, snapshot.twin_id, x, receipt_us, ts);
    record_verdict(v);
  } catch (const Error& e) {
    if (e.code() == Errc::no_served_model) no_model_events_.fetch_add(1);
    else classify_failures_.fetch_add(1);
  }
  forward(sensor_log_, observed);
}

void DetectionService::on_flow_summary(const std::string& twin_id,
                                       const std::map<std::string, double>& features,
                                       int64_t timestamp_ms, int64_t receipt_us) {
  const Schema& schema = schema_by_name(config_.net_schema);
  Record observed;
  try {
    observed = record_from_flow(schema, twin_id, features, timestamp_ms);
  } catch (const Error&) {
    classify_failures_.fetch_add(1);
    return;
  }

  auto served = net_slot_.current();
  if (!served) {
    no_model_events_.fetch_add(1);
    forward(network_log_, observed);
    return;
  }
  try {
    Eigen::VectorXd x = served->model.preprocessor->transform(observed);
    Verdict v = classify(VerdictKind::network_intrusion, twin_id, x, receipt_us, timestamp_ms);
    record_verdict(v);
  } catch (const Error& e) {
    if (e.code() == Errc::no_served_model) no_model_events_.fetch_add(1);
    else classify_failures_.fetch_add(1);
  }
  forward(network_log_, observed);
}

void DetectionService::on_release(const std::string& twin_id) {
  std::lock_guard lk(fusion_m_);
  fusion_.erase(twin_id);
}

}  // namespace dtwin
