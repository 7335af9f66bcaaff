#include <sstream>
#include <thread>

#include "doctest.h"
#include "dtwin/bench.hpp"
#include "dtwin/sim.hpp"
#include "dtwin/stack.hpp"
#include "helpers.hpp"

using namespace dtwin;
using dtwin::testing::listing_definition;

namespace {

NodeProfile profile_for(int serial, NodeBehavior behavior, double period_s, double onset_s,
                        uint64_t seed) {
  NodeProfile p;
  p.twin = listing_definition(std::to_string(serial));
  p.period_s = period_s;
  p.behavior = behavior;
  p.onset_s = onset_s;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("node simulator mirrors at the configured rate and is seed-deterministic") {
  FogStack stack{FogStackOptions{}};
  stack.start();
  stack.registry().create_twin(listing_definition("1"));

  NodeProfile p = profile_for(1, NodeBehavior::benign, 0.05, 1e9, 99);
  NodeSimulator sim1(p, "127.0.0.1", stack.mirror_port());
  NodeRunSummary s1 = sim1.run_for(1.0);
  // rate contract with scheduling slack: 1 s at 20 Hz
  CHECK(s1.sent >= 15);
  CHECK(s1.acked == s1.sent);
  CHECK(s1.refused == 0);
  CHECK(stack.registry().get_twin(s1.twin_id).revision >= s1.sent * 4);
  CHECK(s1.final_mode == NodeMode::running);

  NodeSimulator sim2(p, "127.0.0.1", stack.mirror_port());
  NodeRunSummary s2 = sim2.run_for(1.0);
  size_t shared = std::min(s1.emitted.size(), s2.emitted.size());
  REQUIRE(shared > 5);
  for (size_t i = 0; i < shared; ++i) {
    CHECK(s1.emitted[i].temperature == s2.emitted[i].temperature);
    CHECK(s1.emitted[i].loudness == s2.emitted[i].loudness);
  }
  stack.stop();
}

TEST_CASE("unreachable endpoint fails with ConnectFailure") {
  NodeProfile p = profile_for(1, NodeBehavior::benign, 0.1, 1e9, 1);
  NodeSimulator sim(p, "127.0.0.1", 1);
  try {
    sim.run_for(0.2);
    FAIL("expected ConnectFailure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::connect_failure);
  }
}

TEST_CASE("anomalous node is quarantined and keeps getting refused") {
  FogStackOptions opts;
  opts.detection.endpoint_mode = true;
  FogStack stack(opts);
  stack.start();

  Hyperparams hp = default_hyperparams(ModelKind::random_forest, 10);
  hp.rf_estimators = 25;
  ScenarioModel sm = train_scenario_model("anoml_iot", hp, 1500, 0.1, 10);
  stack.data_slot().swap(sm.model);

  stack.registry().create_twin(listing_definition("1"));
  NodeProfile p = profile_for(1, NodeBehavior::data_anomalous, 0.05, 0.3, 42);
  NodeSimulator sim(p, "127.0.0.1", stack.mirror_port());
  NodeRunSummary s = sim.run_for(1.5);

  CHECK(s.final_mode == NodeMode::quarantined);
  CHECK(s.actions_received == 1);
  CHECK(s.refused >= 1);
  CHECK(stack.registry().quarantined(s.twin_id));
  CHECK(stack.detection().status_of(s.twin_id).state == NodeState::compromised);
  stack.stop();
}

TEST_CASE("gateway emits one summary per node per window") {
  FogStack stack{FogStackOptions{}};
  stack.start();
  std::vector<NodeProfile> profiles;
  for (int i = 1; i <= 3; ++i) {
    stack.registry().create_twin(listing_definition(std::to_string(i)));
    profiles.push_back(profile_for(i, NodeBehavior::benign, 1.0, 1e9, 7 + i));
  }

  SUBCASE("window arithmetic: 3.5 windows yields 3 rounds") {
    GatewaySimulator gw(profiles, "127.0.0.1", stack.mirror_port(), 0.2);
    GatewayRunSummary s = gw.run_for(0.7);
    CHECK(s.windows == 3);
    CHECK(s.sent == 9);
    for (const auto& p : profiles) {
      CHECK(s.sent_per_twin.at(NodeSimulator::twin_id_for(p.twin)) == 3);
    }
  }
  SUBCASE("zero nodes, zero summaries") {
    GatewaySimulator gw({}, "127.0.0.1", stack.mirror_port(), 0.2);
    GatewayRunSummary s = gw.run_for(0.5);
    CHECK(s.sent == 0);
  }
  stack.stop();
}

TEST_CASE("only the intrusive node's flows classify as malicious") {
  FogStackOptions opts;
  FogStack stack(opts);
  stack.start();

  Hyperparams hp = default_hyperparams(ModelKind::mlp, 31);
  ScenarioModel sm = train_scenario_model("iotid20", hp, 2000, 0.1, 31);
  REQUIRE(sm.metrics.accuracy >= 0.95);
  stack.net_slot().swap(sm.model);

  std::vector<NodeProfile> profiles;
  for (int i = 1; i <= 3; ++i) {
    stack.registry().create_twin(listing_definition(std::to_string(i)));
    profiles.push_back(profile_for(i, i == 2 ? NodeBehavior::intrusive : NodeBehavior::benign,
                                   1.0, 0.0, 50 + i));
    profiles.back().duration_s = 1e9;
  }
  std::map<std::string, std::pair<int, int>> verdicts;  // twin -> (positives, total)
  stack.detection().on_verdict([&](const Verdict& v) {
    auto& [pos, total] = verdicts[v.twin_id];
    pos += v.label;
    total += 1;
  });

  GatewaySimulator gw(profiles, "127.0.0.1", stack.mirror_port(), 0.15);
  gw.run_for(0.65);

  std::string intrusive_id = NodeSimulator::twin_id_for(profiles[1].twin);
  REQUIRE(verdicts.count(intrusive_id) == 1);
  CHECK(verdicts[intrusive_id].first >= 1);
  for (const auto& p : profiles) {
    std::string id = NodeSimulator::twin_id_for(p.twin);
    if (id == intrusive_id) continue;
    if (verdicts.count(id)) CHECK(verdicts[id].first == 0);
  }
  stack.stop();
}

TEST_CASE("standard error matches the textbook formula") {
  StatSummary s;
  s.samples = {1, 2, 3, 4, 5};
  CHECK(s.mean() == doctest::Approx(3.0));
  // stddev = sqrt(2.5), stderr = sqrt(2.5)/sqrt(5)
  CHECK(s.standard_error() == doctest::Approx(std::sqrt(2.5) / std::sqrt(5.0)));
  StatSummary single;
  single.samples = {4.2};
  CHECK(std::isnan(single.standard_error()));  // absent below two runs
}

TEST_CASE("model timing bench measures every axis") {
  std::string dir = dtwin::testing::unique_temp_dir("bench");
  Hyperparams hp = default_hyperparams(ModelKind::mlp, 3);
  hp.mlp_epochs = 10;
  ScenarioModel sm = train_scenario_model("anoml_iot", hp, 600, 0.2, 3);
  std::string path = dir + "/m.dtm";
  save_model(sm.model, path);

  TimingReport r = bench_model_timings(path, sm.train, sm.test, 3);
  CHECK(r.runs == 3);
  CHECK(r.model == "mlp");
  CHECK(r.dataset == "anoml_iot");
  CHECK(r.file_bytes == std::filesystem::file_size(path));
  CHECK(r.load_ms.samples.size() == 3);
  CHECK(r.fit_ms.samples.size() == 3);
  CHECK(r.classify_ms.samples.size() == 3);
  for (double v : r.load_ms.samples) CHECK(v >= 0.0);
  for (double v : r.classify_ms.samples) CHECK(v >= 0.0);

  SUBCASE("single run marks the standard error absent") {
    TimingReport one = bench_model_timings(path, sm.train, sm.test, 1);
    CHECK(std::isnan(one.load_ms.standard_error()));
    std::string csv = timing_reports_csv({one});
    CHECK(csv.find(",,") != std::string::npos);  // empty stderr cells
  }
  SUBCASE("corrupt file is reported") {
    write_file(dir + "/bad.dtm", "nope");
    try {
      bench_model_timings(dir + "/bad.dtm", sm.train, sm.test, 1);
      FAIL("expected CorruptModelFile");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_model_file);
    }
  }
}

TEST_CASE("latency csv carries recomputable run vectors") {
  LatencyReport r;
  r.dataset = "anoml_iot";
  r.model = "mlp";
  r.mode = "loaded";
  r.run_ms = {1.0, 2.0, 3.0};
  StatSummary s{r.run_ms};
  r.mean_ms = s.mean();
  r.stderr_ms = s.standard_error();
  std::string csv = latency_reports_csv({r});

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "dataset,classifier,mode,run,elapsed_ms,measured_from");
  double sum = 0.0;
  int runs = 0;
  double mean_row = -1.0;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string dataset, model, mode, run, value, origin;
    std::getline(cells, dataset, ',');
    std::getline(cells, model, ',');
    std::getline(cells, mode, ',');
    std::getline(cells, run, ',');
    std::getline(cells, value, ',');
    std::getline(cells, origin, ',');
    CHECK(origin == "wire_receipt");
    if (run == "mean") {
      mean_row = std::stod(value);
    } else if (run != "stderr") {
      sum += std::stod(value);
      ++runs;
    }
  }
  CHECK(runs == 3);
  CHECK(mean_row == doctest::Approx(sum / runs));
}
