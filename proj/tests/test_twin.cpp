#include <atomic>
#include <thread>

#include "doctest.h"
#include "dtwin/twin.hpp"
#include "helpers.hpp"

using namespace dtwin;
using dtwin::testing::listing_config;
using dtwin::testing::listing_definition;

TEST_CASE("configuration document parses with feature order preserved") {
  TwinDefinition def = parse_twin_config(listing_config());
  CHECK(def.definition_id == "kw.edu.paaet:arduino:1.0");
  CHECK(def.attributes.at("manufacturer") == "Arduino Inc");
  CHECK(def.attributes.at("serialno") == "1");
  REQUIRE(def.feature_names ==
          std::vector<std::string>{"temperature", "humidity", "light", "loudness"});
  for (const auto& f : def.feature_names) CHECK(def.initial_values.at(f) == 0.0);
}

TEST_CASE("configuration error cases") {
  SUBCASE("empty features section is allowed") {
    TwinDefinition def = parse_twin_config(R"({"definition":"a:b","features":{}})");
    CHECK(def.feature_names.empty());
  }
  SUBCASE("duplicate feature") {
    std::string text = R"({"definition":"a:b","features":{
      "temperature":{"properties":{"value":0.0}},
      "temperature":{"properties":{"value":1.0}}}})";
    try {
      parse_twin_config(text);
      FAIL("expected DuplicateFeature");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::duplicate_feature);
    }
  }
  SUBCASE("missing sections") {
    try {
      parse_twin_config(R"({"features":{}})");
      FAIL("expected MissingSection");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::missing_section);
    }
    try {
      parse_twin_config(R"({"definition":"a:b"})");
      FAIL("expected MissingSection");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::missing_section);
    }
  }
  SUBCASE("syntax errors") {
    try {
      parse_twin_config("{not json");
      FAIL("expected MalformedConfig");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_config);
    }
  }
  SUBCASE("definition id needs a namespace separator") {
    CHECK_THROWS_AS(parse_twin_config(R"({"definition":"noseparator","features":{}})"), Error);
  }
  SUBCASE("attributes must be strings") {
    CHECK_THROWS_AS(
        parse_twin_config(R"({"definition":"a:b","attributes":{"x":1},"features":{}})"), Error);
  }
  SUBCASE("feature needs properties.value") {
    CHECK_THROWS_AS(
        parse_twin_config(R"({"definition":"a:b","features":{"t":{"properties":{}}}})"), Error);
  }
}

TEST_CASE("serialize then parse is the identity") {
  Rng rng(404);
  for (int trial = 0; trial < 40; ++trial) {
    TwinDefinition def;
    def.definition_id = "ns" + std::to_string(trial) + ":device:1." + std::to_string(rng.index(9));
    size_t attrs = rng.index(4);
    for (size_t a = 0; a < attrs; ++a) {
      def.attributes["attr" + std::to_string(a)] = "value " + std::to_string(rng.index(100));
    }
    size_t features = rng.index(6);
    for (size_t f = 0; f < features; ++f) {
      std::string name = "feature_" + std::to_string(f);
      def.feature_names.push_back(name);
      def.initial_values[name] = rng.uniform(-50.0, 50.0);
    }
    TwinDefinition back = parse_twin_config(serialize_twin_config(def));
    CHECK(back.definition_id == def.definition_id);
    CHECK(back.attributes == def.attributes);
    CHECK(back.feature_names == def.feature_names);
    CHECK(back.initial_values == def.initial_values);
  }
}

TEST_CASE("twin creation and identity") {
  TwinRegistry reg;
  std::string id = reg.create_twin(listing_definition());
  CHECK(id == "kw.edu.paaet:arduino:1.0/1");
  TwinSnapshot snap = reg.get_twin(id);
  CHECK(snap.revision == 0);
  CHECK(snap.feature_values.at("temperature").value == 0.0);

  SUBCASE("same definition and serial is a duplicate") {
    try {
      reg.create_twin(listing_definition());
      FAIL("expected DuplicateTwin");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::duplicate_twin);
    }
  }
  SUBCASE("different serial gets its own twin") {
    std::string id2 = reg.create_twin(listing_definition("2"));
    CHECK(id2 != id);
    CHECK(reg.twin_count() == 2);
  }
  SUBCASE("missing serial falls back to a registry counter") {
    TwinDefinition def = listing_definition();
    def.attributes.erase("serialno");
    std::string a = reg.create_twin(def);
    std::string b = reg.create_twin(def);
    CHECK(a != b);
  }
}

TEST_CASE("feature updates") {
  TwinRegistry reg;
  std::string id = reg.create_twin(listing_definition());

  StateChangeEvent ev = reg.update_feature(id, "temperature", 23.5, 1000);
  CHECK(ev.old_value == 0.0);
  CHECK(ev.new_value == doctest::Approx(23.5));
  CHECK(ev.revision == 1);

  SUBCASE("equal-value updates still count") {
    StateChangeEvent ev2 = reg.update_feature(id, "temperature", 23.5, 2000);
    CHECK(ev2.revision == 2);
    CHECK(ev2.old_value == doctest::Approx(23.5));
  }
  SUBCASE("stale timestamps still apply (last writer wins by arrival)") {
    reg.update_feature(id, "temperature", 30.0, 500);
    CHECK(reg.get_twin(id).feature_values.at("temperature").timestamp_ms == 500);
  }
  SUBCASE("the air-quality sensor was never mirrored") {
    try {
      reg.update_feature(id, "airquality", 1.0, 0);
      FAIL("expected UnknownFeature");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_feature);
    }
  }
  SUBCASE("unknown twin") {
    try {
      reg.update_feature("missing:twin/9", "temperature", 1.0, 0);
      FAIL("expected UnknownTwin");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_twin);
    }
    CHECK_THROWS_AS(reg.get_twin("missing:twin/9"), Error);
  }
  SUBCASE("sequential updates read back the last value") {
    reg.update_feature(id, "temperature", 1.0, 1);
    reg.update_feature(id, "temperature", 2.0, 2);
    TwinSnapshot snap = reg.get_twin(id);
    CHECK(snap.feature_values.at("temperature").value == 2.0);
    CHECK(snap.revision == 3);
  }
}

TEST_CASE("quarantine blocks updates until release") {
  TwinRegistry reg;
  std::string id = reg.create_twin(listing_definition());
  reg.set_quarantined(id, true);
  CHECK(reg.quarantined(id));
  try {
    reg.update_feature(id, "temperature", 1.0, 0);
    FAIL("expected QuarantinedTwin");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::quarantined_twin);
  }
  reg.set_quarantined(id, false);
  CHECK(reg.update_feature(id, "temperature", 1.0, 0).revision == 1);
}

TEST_CASE("replay oracle: final state equals the last update per feature") {
  TwinRegistry reg;
  std::vector<std::string> ids;
  for (int i = 1; i <= 3; ++i) {
    ids.push_back(reg.create_twin(listing_definition(std::to_string(i))));
  }
  Rng rng(2024);
  std::map<std::string, std::map<std::string, double>> expected;
  std::map<std::string, uint64_t> counts;
  const std::vector<std::string> features = {"temperature", "humidity", "light", "loudness"};
  for (int step = 0; step < 500; ++step) {
    const std::string& id = ids[rng.index(ids.size())];
    const std::string& f = features[rng.index(features.size())];
    double v = rng.uniform(-100.0, 100.0);
    reg.update_feature(id, f, v, step);
    expected[id][f] = v;
    counts[id]++;
  }
  for (const auto& id : ids) {
    TwinSnapshot snap = reg.get_twin(id);
    CHECK(snap.revision == counts[id]);
    for (const auto& [f, v] : expected[id]) {
      CHECK(snap.feature_values.at(f).value == doctest::Approx(v));
    }
  }
}

TEST_CASE("subscriptions deliver per-twin revision order") {
  TwinRegistry reg;
  std::string id = reg.create_twin(listing_definition());

  SUBCASE("three updates arrive as revisions 1,2,3") {
    auto sub = reg.subscribe();
    reg.update_feature(id, "temperature", 1.0, 1);
    reg.update_feature(id, "temperature", 2.0, 2);
    reg.update_feature(id, "humidity", 3.0, 3);
    auto events = sub->drain();
    REQUIRE(events.size() == 3);
    for (size_t i = 0; i < events.size(); ++i) CHECK(events[i].revision == i + 1);
  }
  SUBCASE("filters drop non-matching twins") {
    auto sub = reg.subscribe([](const std::string& twin) { return twin == "other"; });
    reg.update_feature(id, "temperature", 1.0, 1);
    CHECK(sub->drain().empty());
  }
  SUBCASE("closed subscriptions stop accumulating") {
    auto sub = reg.subscribe();
    sub->close();
    reg.update_feature(id, "temperature", 1.0, 1);
    CHECK(sub->drain().empty());
  }
}

TEST_CASE("interleaved writers keep per-twin order and gap-free revisions") {
  TwinRegistry reg;
  std::vector<std::string> ids;
  for (int i = 1; i <= 10; ++i) {
    ids.push_back(reg.create_twin(listing_definition(std::to_string(i))));
  }
  auto sub = reg.subscribe();

  std::vector<std::thread> writers;
  for (int w = 0; w < 4; ++w) {
    writers.emplace_back([&, w] {
      Rng rng(static_cast<uint64_t>(w) + 1);
      for (int step = 0; step < 250; ++step) {
        const std::string& id = ids[rng.index(ids.size())];
        reg.update_feature(id, "temperature", rng.uniform(), step);
      }
    });
  }
  for (auto& t : writers) t.join();

  std::map<std::string, uint64_t> last;
  size_t total = 0;
  for (const auto& ev : sub->drain()) {
    ++total;
    CHECK(ev.revision == last[ev.twin_id] + 1);  // gap-free, strictly increasing
    last[ev.twin_id] = ev.revision;
  }
  CHECK(total == 1000);
  uint64_t sum = 0;
  for (const auto& id : ids) sum += reg.get_twin(id).revision;
  CHECK(sum == 1000);
}

TEST_CASE("snapshots are never torn") {
  TwinRegistry reg;
  std::string id = reg.create_twin(listing_definition());
  const std::vector<std::string> features = {"temperature", "humidity", "light", "loudness"};

  // value of feature j after revision r is fully determined by (r, j)
  auto value_at = [&](uint64_t revision, size_t feature) {
    return static_cast<double>(revision) * 10.0 + static_cast<double>(feature);
  };

  std::atomic<bool> done{false};
  std::atomic<int> torn{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      while (!done.load()) {
        TwinSnapshot snap = reg.get_twin(id);
        // reconstruct what each feature must hold at this revision: the last
        // update to feature j at or before `revision`
        for (size_t j = 0; j < features.size(); ++j) {
          uint64_t rev = snap.revision;
          if (rev == 0) break;
          // updates cycle round-robin: feature (k-1) % 4 at revision k
          uint64_t latest = 0;
          for (uint64_t k = rev; k >= 1; --k) {
            if ((k - 1) % features.size() == j) {
              latest = k;
              break;
            }
            if (k == 1) break;
          }
          if (latest == 0) continue;  // not yet updated; initial 0.0
          double want = value_at(latest, j);
          if (snap.feature_values.at(features[j]).value != want) torn.fetch_add(1);
        }
      }
    });
  }

  for (uint64_t k = 1; k <= 2000; ++k) {
    size_t j = (k - 1) % features.size();
    reg.update_feature(id, features[j], value_at(k, j), static_cast<int64_t>(k));
  }
  done.store(true);
  for (auto& t : readers) t.join();
  CHECK(torn.load() == 0);
}
