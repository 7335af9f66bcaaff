#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dtwin/cloud.hpp"
#include "dtwin/ml.hpp"

namespace dtwin {

// Sample vector with mean and standard error; reports always carry the raw
// runs so the aggregates can be recomputed externally.
struct StatSummary {
  std::vector<double> samples;

  double mean() const;
  // sample stddev / sqrt(n); NaN when fewer than 2 samples
  double standard_error() const;
  int runs() const { return static_cast<int>(samples.size()); }
};

struct TimingReport {
  std::string dataset;
  std::string model;
  uint64_t file_bytes = 0;
  size_t fit_rows = 0;  // training scale used for the fit timing
  StatSummary load_ms;
  StatSummary fit_ms;
  StatSummary classify_ms;  // per record
  int runs = 0;
};

// Measures on-disk size, cold load time, re-fit time (using the hyperparams
// recorded in the file) and mean per-record classification time, repeated
// `runs` times.
TimingReport bench_model_timings(const std::string& model_path, const Dataset& fit_data,
                                 const Dataset& eval_data, int runs);

std::string timing_reports_csv(const std::vector<TimingReport>& reports);
std::string timing_reports_table(const std::vector<TimingReport>& reports);

struct LatencyScenario {
  std::string dataset = "anoml_iot";
  ModelKind model = ModelKind::mlp;
  bool loaded = true;
  int runs = 5;
  uint64_t seed = 7;
  int train_n = 1200;
  double anomaly_rate = 0.1;
  std::string work_dir;  // model files land here; empty uses a temp dir
};

struct LatencyReport {
  std::string dataset;
  std::string model;
  std::string mode;  // loaded | unloaded
  std::vector<double> run_ms;
  double mean_ms = 0.0;
  double stderr_ms = NAN;
  // e2e time starts when the fog reads the state change off the wire
  std::string measured_from = "wire_receipt";
};

// Brings up a local fog stack over loopback, injects one benign state change
// per run and measures wire-receipt-to-verdict time at the fog.
LatencyReport bench_end_to_end(const LatencyScenario& scenario);

std::string latency_reports_csv(const std::vector<LatencyReport>& reports);
std::string latency_reports_table(const std::vector<LatencyReport>& reports);

// Shared scaffolding: seeded synthetic data, stratified split, preprocessor
// and trained model for one scenario.
struct ScenarioModel {
  TrainedModel model;
  Preprocessor pp;
  Metrics metrics;
  Dataset train;
  Dataset test;
  std::vector<Record> train_records;
  std::vector<Record> test_records;
};

Hyperparams default_hyperparams(ModelKind kind, uint64_t seed);

ScenarioModel train_scenario_model(const std::string& scenario, const Hyperparams& hp, int n,
                                   double anomaly_rate, uint64_t data_seed);

}  // namespace dtwin
