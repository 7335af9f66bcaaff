#pragma once

#include <memory>
#include <string>

#include "dtwin/cloud.hpp"
#include "dtwin/detection.hpp"
#include "dtwin/mirror.hpp"

namespace dtwin {

struct FogStackOptions {
  int mirror_port = 0;  // 0 picks an ephemeral port
  int data_port = 0;
  int net_port = 0;
  int push_port = 0;
  DetectionConfig detection;
  std::string spool_dir;         // where pushed model files land
  std::string sensor_log_path;   // behavior logs; empty disables forwarding
  std::string network_log_path;
};

// One process hosting the whole fog side: twin registry, mirror endpoint,
// both classifier endpoints, the model push listener and the detection
// pipeline, wired together.
class FogStack {
 public:
  explicit FogStack(FogStackOptions opts);
  ~FogStack();

  void start();  // throws StackUnavailable when a component cannot come up
  void stop();

  TwinRegistry& registry() { return registry_; }
  ModelSlot& data_slot() { return data_slot_; }
  ModelSlot& net_slot() { return net_slot_; }
  DetectionService& detection() { return *detection_; }
  MirrorServer& mirror() { return *mirror_; }
  ModelEndpoint& data_endpoint() { return *data_endpoint_; }
  ModelEndpoint& net_endpoint() { return *net_endpoint_; }

  int mirror_port() const { return mirror_->port(); }
  int data_port() const { return data_endpoint_->port(); }
  int net_port() const { return net_endpoint_->port(); }
  int push_port() const { return push_->port(); }

 private:
  FogStackOptions opts_;
  TwinRegistry registry_;
  ModelSlot data_slot_;
  ModelSlot net_slot_;
  std::unique_ptr<BehaviorForwarder> sensor_log_;
  std::unique_ptr<BehaviorForwarder> network_log_;
  std::unique_ptr<ModelEndpoint> data_endpoint_;
  std::unique_ptr<ModelEndpoint> net_endpoint_;
  std::unique_ptr<PushListener> push_;
  std::unique_ptr<DetectionService> detection_;
  std::unique_ptr<MirrorServer> mirror_;
  bool started_ = false;
};

}  // namespace dtwin
