#include "dtwin/twin.hpp"

#include <algorithm>
#include <set>

#include "nlohmann/json.hpp"

namespace dtwin {

using json = nlohmann::json;

void TwinDefinition::validate() const {
  if (definition_id.empty() || definition_id.find(':') == std::string::npos) {
    fail(Errc::malformed_config, "definition id must be namespaced with ':'");
  }
  std::set<std::string> seen;
  for (const auto& f : feature_names) {
    if (f.empty()) fail(Errc::malformed_config, "empty feature name");
    if (!seen.insert(f).second) fail(Errc::duplicate_feature, f);
  }
  for (const auto& [name, _] : initial_values) {
    if (!seen.count(name)) {
      fail(Errc::malformed_config, "initial value for undeclared feature " + name);
    }
  }
}

bool TwinDefinition::has_feature(const std::string& name) const {
  return std::find(feature_names.begin(), feature_names.end(), name) != feature_names.end();
}

namespace {

// SAX pass that records the keys of the `features` object in document order.
// nlohmann's tree API cannot do this: plain json sorts keys and the ordered
// variant silently keeps the last duplicate.
struct FeatureKeyScan : json::json_sax_t {
  std::vector<std::string> feature_keys;
  std::vector<std::string> key_stack;  // last key seen at each object depth
  int depth = 0;
  bool in_features_object = false;

  bool record_key(const std::string& k) {
    if (depth >= 1 && static_cast<size_t>(depth) <= key_stack.size()) {
      key_stack[depth - 1] = k;
    }
    if (in_features_object && depth == 2) feature_keys.push_back(k);
    return true;
  }

  bool start_object(std::size_t) override {
    if (depth == 1 && !key_stack.empty() && key_stack[0] == "features") {
      in_features_object = true;
    }
    ++depth;
    key_stack.resize(static_cast<size_t>(depth));
    return true;
  }
  bool end_object() override {
    --depth;
    key_stack.resize(static_cast<size_t>(depth));
    if (depth <= 1) in_features_object = false;
    return true;
  }
  bool key(string_t& k) override { return record_key(k); }
  bool start_array(std::size_t) override {
    ++depth;
    key_stack.resize(static_cast<size_t>(depth));
    return true;
  }
  bool end_array() override {
    --depth;
    key_stack.resize(static_cast<size_t>(depth));
    return true;
  }
  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(number_integer_t) override { return true; }
  bool number_unsigned(number_unsigned_t) override { return true; }
  bool number_float(number_float_t, const string_t&) override { return true; }
  bool string(string_t&) override { return true; }
  bool binary(binary_t&) override { return true; }
  bool parse_error(std::size_t, const std::string&, const json::exception&) override {
    return false;
  }
};

}  // namespace

TwinDefinition parse_twin_config(const std::string& text) {
  FeatureKeyScan scan;
  if (!json::sax_parse(text, &scan)) {
    fail(Errc::malformed_config, "configuration is not valid JSON");
  }
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    fail(Errc::malformed_config, "configuration is not a JSON object");
  }

  if (!doc.contains("definition")) fail(Errc::missing_section, "definition");
  if (!doc.contains("features")) fail(Errc::missing_section, "features");
  if (!doc["definition"].is_string()) {
    fail(Errc::malformed_config, "definition must be a string");
  }
  if (!doc["features"].is_object()) {
    fail(Errc::malformed_config, "features must be an object");
  }

  TwinDefinition def;
  def.definition_id = doc["definition"].get<std::string>();

  if (doc.contains("attributes")) {
    if (!doc["attributes"].is_object()) {
      fail(Errc::malformed_config, "attributes must be an object");
    }
    for (const auto& [name, value] : doc["attributes"].items()) {
      if (!value.is_string()) {
        fail(Errc::malformed_config, "attribute " + name + " must be a string");
      }
      def.attributes[name] = value.get<std::string>();
    }
  }

  std::set<std::string> seen;
  for (const auto& fname : scan.feature_keys) {
    if (!seen.insert(fname).second) fail(Errc::duplicate_feature, fname);
    const json& feature = doc["features"][fname];
    if (!feature.is_object() || !feature.contains("properties") ||
        !feature["properties"].is_object() || !feature["properties"].contains("value") ||
        !feature["properties"]["value"].is_number()) {
      fail(Errc::malformed_config, "feature " + fname + " needs properties.value");
    }
    def.feature_names.push_back(fname);
    def.initial_values[fname] = feature["properties"]["value"].get<double>();
  }

  def.validate();
  return def;
}

std::string serialize_twin_config(const TwinDefinition& def) {
  def.validate();
  nlohmann::ordered_json doc;
  doc["definition"] = def.definition_id;
  nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
  for (const auto& [name, value] : def.attributes) attrs[name] = value;
  doc["attributes"] = std::move(attrs);
  nlohmann::ordered_json features = nlohmann::ordered_json::object();
  for (const auto& fname : def.feature_names) {
    auto it = def.initial_values.find(fname);
    double v = it != def.initial_values.end() ? it->second : 0.0;
    features[fname] = nlohmann::ordered_json{{"properties", {{"value", v}}}};
  }
  doc["features"] = std::move(features);
  return doc.dump(1);
}

// ---------------------------------------------------------------------------
// Subscription

void Subscription::push(const StateChangeEvent& ev) {
  {
    std::lock_guard lk(m_);
    if (closed_) return;
    if (filter_ && !filter_(ev.twin_id)) return;
    queue_.push_back(ev);
  }
  cv_.notify_one();
}

std::optional<StateChangeEvent> Subscription::poll() {
  std::lock_guard lk(m_);
  if (queue_.empty()) return std::nullopt;
  StateChangeEvent ev = std::move(queue_.front());
  queue_.pop_front();
  return ev;
}

std::optional<StateChangeEvent> Subscription::wait_for(int timeout_ms) {
  std::unique_lock lk(m_);
  cv_.wait_for(lk, std::chrono::milliseconds(timeout_ms),
               [&] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  StateChangeEvent ev = std::move(queue_.front());
  queue_.pop_front();
  return ev;
}

std::vector<StateChangeEvent> Subscription::drain() {
  std::lock_guard lk(m_);
  std::vector<StateChangeEvent> out(queue_.begin(), queue_.end());
  queue_.clear();
  return out;
}

void Subscription::close() {
  {
    std::lock_guard lk(m_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lk(m_);
  return closed_;
}

// ---------------------------------------------------------------------------
// TwinRegistry

std::string TwinRegistry::create_twin(const TwinDefinition& def) {
  def.validate();
  std::string twin_id;
  auto serial = def.attributes.find("serialno");
  if (serial != def.attributes.end()) {
    twin_id = def.definition_id + "/" + serial->second;
  } else {
    twin_id = def.definition_id + "/#" + std::to_string(counter_.fetch_add(1) + 1);
  }

  auto state = std::make_shared<TwinState>();
  state->def = def;
  for (const auto& fname : def.feature_names) {
    auto it = def.initial_values.find(fname);
    state->values[fname] = FeatureState{it != def.initial_values.end() ? it->second : 0.0, 0};
  }

  std::unique_lock lk(registry_m_);
  if (!twins_.emplace(twin_id, std::move(state)).second) {
    fail(Errc::duplicate_twin, twin_id);
  }
  return twin_id;
}

std::shared_ptr<TwinRegistry::TwinState> TwinRegistry::find(const std::string& twin_id) const {
  std::shared_lock lk(registry_m_);
  auto it = twins_.find(twin_id);
  if (it == twins_.end()) fail(Errc::unknown_twin, twin_id);
  return it->second;
}

StateChangeEvent TwinRegistry::update_feature(const std::string& twin_id,
                                              const std::string& feature, double value,
                                              int64_t timestamp_ms) {
  auto state = find(twin_id);
  StateChangeEvent ev;
  {
    std::lock_guard lk(state->m);
    if (state->quarantined) fail(Errc::quarantined_twin, twin_id);
    auto it = state->values.find(feature);
    if (it == state->values.end()) fail(Errc::unknown_feature, feature + " on " + twin_id);
    ev.twin_id = twin_id;
    ev.feature = feature;
    ev.old_value = it->second.value;
    ev.new_value = value;
    ev.timestamp_ms = timestamp_ms;
    // last writer by arrival wins, even with an older timestamp
    it->second = FeatureState{value, timestamp_ms};
    ev.revision = ++state->revision;
    // published under the twin lock so subscribers observe revision order
    publish(ev);
  }
  return ev;
}

TwinSnapshot TwinRegistry::get_twin(const std::string& twin_id) const {
  auto state = find(twin_id);
  std::lock_guard lk(state->m);
  TwinSnapshot snap;
  snap.twin_id = twin_id;
  snap.definition = state->def;
  snap.feature_values = state->values;
  snap.revision = state->revision;
  snap.quarantined = state->quarantined;
  return snap;
}

bool TwinRegistry::exists(const std::string& twin_id) const {
  std::shared_lock lk(registry_m_);
  return twins_.count(twin_id) > 0;
}

std::vector<std::string> TwinRegistry::twin_ids() const {
  std::shared_lock lk(registry_m_);
  std::vector<std::string> out;
  out.reserve(twins_.size());
  for (const auto& [id, _] : twins_) out.push_back(id);
  return out;
}

size_t TwinRegistry::twin_count() const {
  std::shared_lock lk(registry_m_);
  return twins_.size();
}

void TwinRegistry::set_quarantined(const std::string& twin_id, bool value) {
  auto state = find(twin_id);
  std::lock_guard lk(state->m);
  state->quarantined = value;
}

bool TwinRegistry::quarantined(const std::string& twin_id) const {
  auto state = find(twin_id);
  std::lock_guard lk(state->m);
  return state->quarantined;
}

std::shared_ptr<Subscription> TwinRegistry::subscribe(
    std::function<bool(const std::string&)> filter) {
  auto sub = std::make_shared<Subscription>();
  sub->filter_ = std::move(filter);
  std::lock_guard lk(subs_m_);
  subs_.erase(std::remove_if(subs_.begin(), subs_.end(),
                             [](const std::weak_ptr<Subscription>& w) { return w.expired(); }),
              subs_.end());
  subs_.push_back(sub);
  return sub;
}

void TwinRegistry::publish(const StateChangeEvent& ev) {
  std::lock_guard lk(subs_m_);
  for (const auto& w : subs_) {
    if (auto sub = w.lock()) sub->push(ev);
  }
}

}  // namespace dtwin
