#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "dtwin/data.hpp"
#include "dtwin/ml.hpp"
#include "dtwin/protocol.hpp"
#include "dtwin/twin.hpp"

namespace dtwin::testing {

struct GradCheckResult {
  double worst_rel = 0.0;
  size_t checked = 0;
  size_t skipped = 0;  // coordinates where +/-eps crossed a ReLU kink
};

// Central-difference check of the analytic gradient. The loss is piecewise
// smooth; a coordinate whose perturbation flips a hidden unit's active state
// has no valid finite-difference estimate and is skipped (and counted).
inline GradCheckResult gradient_check(const MlpParams& p, const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& y, double eps = 1e-5) {
  std::vector<int> widths = mlp_widths(p);
  Eigen::VectorXd analytic = mlp_flatten(mlp_gradients(p, X, y));
  Eigen::VectorXd flat = mlp_flatten(p);
  GradCheckResult result;
  for (Eigen::Index k = 0; k < flat.size(); ++k) {
    Eigen::VectorXd up = flat, down = flat;
    up[k] += eps;
    down[k] -= eps;
    MlpParams pu = mlp_unflatten(up, widths);
    MlpParams pd = mlp_unflatten(down, widths);
    auto zu = mlp_hidden_preactivations(pu, X);
    auto zd = mlp_hidden_preactivations(pd, X);
    bool crossed = false;
    for (size_t l = 0; l < zu.size() && !crossed; ++l) {
      crossed = ((zu[l].array() > 0.0) != (zd[l].array() > 0.0)).any();
    }
    if (crossed) {
      ++result.skipped;
      continue;
    }
    double numeric = (mlp_loss(pu, X, y) - mlp_loss(pd, X, y)) / (2 * eps);
    double rel = std::abs(analytic[k] - numeric) /
                 std::max(std::abs(analytic[k]) + std::abs(numeric), 1e-6);
    result.worst_rel = std::max(result.worst_rel, rel);
    ++result.checked;
  }
  return result;
}

inline std::string unique_temp_dir(const std::string& tag) {
  static std::atomic<uint64_t> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("dtwin-" + tag + "-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(dir);
  return dir.string();
}

// the deployment's configuration document shape, four sensors at 0.0
inline std::string listing_config(const std::string& serialno = "1") {
  return std::string(R"({
 "definition":"kw.edu.paaet:arduino:1.0",
 "attributes":{
  "manufacturer":"Arduino Inc",
  "location":"CS Dept. Corridor",
  "serialno":")") +
         serialno + R"(",
  "model":"Arduino Uno"
 },
 "features":{
  "temperature":{"properties":{"value": 0.0}},
  "humidity":{"properties":{"value": 0.0}},
  "light":{"properties":{"value": 0.0}},
  "loudness":{"properties":{"value": 0.0}}
 }
})";
}

inline TwinDefinition listing_definition(const std::string& serialno = "1") {
  return parse_twin_config(listing_config(serialno));
}

// randomized wire message covering every kind and assorted payload shapes
inline MirrorMessage random_message(Rng& rng) {
  static const MessageKind kinds[] = {
      MessageKind::state_update,     MessageKind::flow_summary, MessageKind::action,
      MessageKind::classify_request, MessageKind::classify_response,
      MessageKind::model_push,       MessageKind::ack,          MessageKind::error};
  MirrorMessage m;
  m.kind = kinds[rng.index(8)];
  m.twin_id = "twin-" + std::to_string(rng.index(1000));
  m.timestamp_ms = static_cast<int64_t>(rng.index(1ull << 44));
  nlohmann::json payload = nlohmann::json::object();
  size_t fields = rng.index(6);
  for (size_t i = 0; i < fields; ++i) {
    std::string key = "k" + std::to_string(rng.index(20));
    switch (rng.index(5)) {
      case 0: payload[key] = rng.uniform(-1e6, 1e6); break;
      case 1: payload[key] = static_cast<int64_t>(rng.u64() >> 20); break;
      case 2: payload[key] = "text with\nnewline and \"quotes\" and \xE2\x98\x82"; break;
      case 3: payload[key] = nlohmann::json::array({1, 2.5, "x"}); break;
      default: payload[key] = {{"nested", true}, {"v", rng.uniform()}}; break;
    }
  }
  m.payload = std::move(payload);
  return m;
}

}  // namespace dtwin::testing
