#pragma once

#include <atomic>
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

#include "dtwin/common.hpp"

namespace dtwin {

struct TwinDefinition {
  std::string definition_id;  // namespaced, e.g. "kw.edu.paaet:arduino:1.0"
  std::map<std::string, std::string> attributes;
  std::vector<std::string> feature_names;  // document order
  std::map<std::string, double> initial_values;

  void validate() const;
  bool has_feature(const std::string& name) const;
};

// Configuration document in the deployment's JSON shape: a `definition`
// string, a flat string `attributes` map, and `features.<name>.properties.value`.
TwinDefinition parse_twin_config(const std::string& text);
std::string serialize_twin_config(const TwinDefinition& def);

struct FeatureState {
  double value = 0.0;
  int64_t timestamp_ms = 0;
};

struct TwinSnapshot {
  std::string twin_id;
  TwinDefinition definition;
  std::map<std::string, FeatureState> feature_values;
  uint64_t revision = 0;
  bool quarantined = false;
};

struct StateChangeEvent {
  std::string twin_id;
  std::string feature;
  double old_value = 0.0;
  double new_value = 0.0;
  int64_t timestamp_ms = 0;
  uint64_t revision = 0;
};

// Event stream handed to a subscriber. Events for one twin arrive in
// revision order; closing the stream is a normal outcome.
class Subscription {
 public:
  std::optional<StateChangeEvent> poll();
  std::optional<StateChangeEvent> wait_for(int timeout_ms);
  std::vector<StateChangeEvent> drain();
  void close();
  bool closed() const;

 private:
  friend class TwinRegistry;
  void push(const StateChangeEvent& ev);

  std::function<bool(const std::string&)> filter_;
  mutable std::mutex m_;
  std::condition_variable cv_;
  std::deque<StateChangeEvent> queue_;
  bool closed_ = false;
};

// Shared twin store. Updates to one twin are serialized; distinct twins
// proceed concurrently; snapshots are consistent copies.
class TwinRegistry {
 public:
  TwinRegistry() = default;
  TwinRegistry(const TwinRegistry&) = delete;
  TwinRegistry& operator=(const TwinRegistry&) = delete;

  // twin id is definition_id + "/" + serialno attribute, or a registry
  // counter when the attribute is absent
  std::string create_twin(const TwinDefinition& def);
  StateChangeEvent update_feature(const std::string& twin_id, const std::string& feature,
                                  double value, int64_t timestamp_ms);
  TwinSnapshot get_twin(const std::string& twin_id) const;
  bool exists(const std::string& twin_id) const;
  std::vector<std::string> twin_ids() const;
  size_t twin_count() const;

  void set_quarantined(const std::string& twin_id, bool value);
  bool quarantined(const std::string& twin_id) const;

  // filter = nullptr subscribes to every twin
  std::shared_ptr<Subscription> subscribe(std::function<bool(const std::string&)> filter = {});

 private:
  struct TwinState {
    TwinDefinition def;
    std::map<std::string, FeatureState> values;
    uint64_t revision = 0;
    bool quarantined = false;
    mutable std::mutex m;
  };

  std::shared_ptr<TwinState> find(const std::string& twin_id) const;
  void publish(const StateChangeEvent& ev);

  mutable std::shared_mutex registry_m_;
  std::map<std::string, std::shared_ptr<TwinState>> twins_;
  std::atomic<uint64_t> counter_{0};

  std::mutex subs_m_;
  std::vector<std::weak_ptr<Subscription>> subs_;
};

}  // namespace dtwin
