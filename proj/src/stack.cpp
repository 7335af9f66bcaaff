#include "dtwin/stack.hpp"

namespace dtwin {

FogStack::FogStack(FogStackOptions opts)
    : opts_(std::move(opts)),
      data_slot_("data_anomaly", opts_.detection.data_schema),
      net_slot_("network_intrusion", opts_.detection.net_schema) {}

FogStack::~FogStack() { stop(); }

void FogStack::start() {
  if (started_) return;
  try {
    data_endpoint_ = std::make_unique<ModelEndpoint>(data_slot_, opts_.data_port);
    net_endpoint_ = std::make_unique<ModelEndpoint>(net_slot_, opts_.net_port);
    data_endpoint_->start();
    net_endpoint_->start();

    DetectionConfig cfg = opts_.detection;
    cfg.data_port = data_endpoint_->port();
    cfg.net_port = net_endpoint_->port();
    detection_ = std::make_unique<DetectionService>(registry_, cfg, data_slot_, net_slot_);

    if (!opts_.sensor_log_path.empty()) {
      sensor_log_ = std::make_unique<BehaviorForwarder>(
          BehaviorForwarder::file_sink(opts_.sensor_log_path));
      detection_->set_sensor_log(sensor_log_.get());
    }
    if (!opts_.network_log_path.empty()) {
      network_log_ = std::make_unique<BehaviorForwarder>(
          BehaviorForwarder::file_sink(opts_.network_log_path));
      detection_->set_network_log(network_log_.get());
    }

    push_ = std::make_unique<PushListener>(data_slot_, net_slot_, opts_.push_port,
                                           opts_.spool_dir);
    push_->start();

    mirror_ = std::make_unique<MirrorServer>(registry_, opts_.mirror_port, detection_.get());
    detection_->set_action_transport(
        [this](const ActionCommand& cmd) { mirror_->send_action(cmd); });
    mirror_->start();
    started_ = true;
  } catch (const Error& e) {
    stop();
    fail(Errc::stack_unavailable, e.what());
  }
}

void FogStack::stop() {
  started_ = false;
  if (mirror_) mirror_->stop();
  if (push_) push_->stop();
  if (data_endpoint_) data_endpoint_->stop();
  if (net_endpoint_) net_endpoint_->stop();
}

}  // namespace dtwin
