#include "dtwin/bench.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>

#include "dtwin/net.hpp"
#include "dtwin/stack.hpp"

namespace dtwin {

using json = nlohmann::json;

double StatSummary::mean() const {
  if (samples.empty()) return NAN;
  double total = 0.0;
  for (double s : samples) total += s;
  return total / static_cast<double>(samples.size());
}

double StatSummary::standard_error() const {
  if (samples.size() < 2) return NAN;
  double m = mean();
  double ss = 0.0;
  for (double s : samples) ss += (s - m) * (s - m);
  double stddev = std::sqrt(ss / static_cast<double>(samples.size() - 1));
  return stddev / std::sqrt(static_cast<double>(samples.size()));
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v, int precision = 3) {
  if (std::isnan(v)) return "";
  char buf[64];
  snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

Hyperparams default_hyperparams(ModelKind kind, uint64_t seed) {
  Hyperparams hp;
  hp.kind = kind;
  hp.seed = seed;
  return hp;
}

ScenarioModel train_scenario_model(const std::string& scenario, const Hyperparams& hp, int n,
                                   double anomaly_rate, uint64_t data_seed) {
  ScenarioModel sm;
  std::vector<Record> records =
      generate_synthetic(scenario, static_cast<size_t>(n), anomaly_rate, data_seed);
  SplitResult split = split_records(records, 0.8, data_seed);
  const Schema& schema = schema_by_name(scenario);
  sm.pp = Preprocessor::fit(schema, split.train);
  sm.train = Dataset::from_vectors(sm.pp.transform_all(split.train));
  sm.test = Dataset::from_vectors(sm.pp.transform_all(split.test));
  sm.model = train_model(sm.train, hp);
  attach_preprocessor(sm.model, sm.pp);
  sm.metrics = evaluate(sm.model, sm.test);
  sm.train_records = std::move(split.train);
  sm.test_records = std::move(split.test);
  return sm;
}

// ---------------------------------------------------------------------------
// Model timing bench

TimingReport bench_model_timings(const std::string& model_path, const Dataset& fit_data,
                                 const Dataset& eval_data, int runs) {
  if (runs < 1) fail(Errc::invalid_rate, "runs must be >= 1");
  if (eval_data.rows() == 0) fail(Errc::empty_test_set, "timing bench needs evaluation rows");

  TrainedModel probe = load_model(model_path);  // throws CorruptModelFile

  // fit timing stays desk scale
  constexpr Eigen::Index kMaxFitRows = 20000;
  Dataset fit_view;
  Eigen::Index fit_rows = std::min(fit_data.rows(), kMaxFitRows);
  fit_view.X = fit_data.X.topRows(fit_rows);
  fit_view.y = fit_data.y.head(fit_rows);

  TimingReport report;
  report.dataset = probe.schema;
  report.model = model_kind_name(probe.kind);
  report.file_bytes = std::filesystem::file_size(model_path);
  report.fit_rows = static_cast<size_t>(fit_rows);
  report.runs = runs;

  for (int r = 0; r < runs; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    TrainedModel loaded = load_model(model_path);
    report.load_ms.samples.push_back(elapsed_ms(t0));

    if (fit_rows > 0) {
      t0 = std::chrono::steady_clock::now();
      TrainedModel refit = train_model(fit_view, probe.hp);
      report.fit_ms.samples.push_back(elapsed_ms(t0));
      (void)refit;
    }

    t0 = std::chrono::steady_clock::now();
    for (Eigen::Index i = 0; i < eval_data.rows(); ++i) {
      loaded.predict(eval_data.X.row(i).transpose());
    }
    report.classify_ms.samples.push_back(elapsed_ms(t0) /
                                         static_cast<double>(eval_data.rows()));
  }
  return report;
}

std::string timing_reports_csv(const std::vector<TimingReport>& reports) {
  std::ostringstream out;
  out << "dataset,classifier,runs,fit_rows,file_bytes,load_ms_mean,load_ms_stderr,"
         "fit_ms_mean,fit_ms_stderr,classify_ms_mean,classify_ms_stderr\n";
  for (const auto& r : reports) {
    out << r.dataset << ',' << r.model << ',' << r.runs << ',' << r.fit_rows << ','
        << r.file_bytes << ',' << fmt(r.load_ms.mean()) << ',' << fmt(r.load_ms.standard_error())
        << ',' << fmt(r.fit_ms.mean()) << ',' << fmt(r.fit_ms.standard_error()) << ','
        << fmt(r.classify_ms.mean(), 4) << ',' << fmt(r.classify_ms.standard_error(), 4) << '\n';
  }
  return out.str();
}

std::string timing_reports_table(const std::vector<TimingReport>& reports) {
  std::ostringstream out;
  char line[256];
  snprintf(line, sizeof(line), "%-10s %-14s %12s %12s %12s %16s\n", "dataset", "classifier",
           "size", "load (ms)", "fit (ms)", "classify (ms)");
  out << line;
  for (const auto& r : reports) {
    std::string size;
    if (r.file_bytes >= 1024 * 1024) {
      size = fmt(static_cast<double>(r.file_bytes) / (1024.0 * 1024.0), 2) + " MB";
    } else {
      size = fmt(static_cast<double>(r.file_bytes) / 1024.0, 2) + " KB";
    }
    snprintf(line, sizeof(line), "%-10s %-14s %12s %12s %12s %16s\n", r.dataset.c_str(),
             r.model.c_str(), size.c_str(), fmt(r.load_ms.mean()).c_str(),
             fmt(r.fit_ms.mean()).c_str(), fmt(r.classify_ms.mean(), 4).c_str());
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// End-to-end latency bench

namespace {

TwinDefinition bench_twin_for(const std::string& dataset, const ScenarioModel& sm) {
  TwinDefinition def;
  if (dataset == "anoml_iot") {
    def.definition_id = "kw.edu.paaet:arduino:1.0";
    def.attributes = {{"manufacturer", "Arduino Inc"}, {"serialno", "bench"}};
    def.feature_names = {"temperature", "humidity", "light", "loudness"};
    for (const auto& f : def.feature_names) def.initial_values[f] = 0.0;
  } else if (dataset == "ds2os") {
    def.definition_id = "dtwin:service:1.0";
    def.attributes = {{"serialno", "bench"}};
    const Schema& schema = schema_by_name(dataset);
    for (size_t ci : schema.feature_indices()) {
      def.feature_names.push_back(schema.columns[ci].name);
      def.initial_values[schema.columns[ci].name] = 0.0;
    }
  } else {
    def.definition_id = "dtwin:node:1.0";  // flow summaries carry the features
    def.attributes = {{"serialno", "bench"}};
  }
  (void)sm;
  return def;
}

// one benign observation in wire form
MirrorMessage bench_stimulus(const std::string& dataset, const std::string& twin_id,
                             const ScenarioModel& sm, Rng& rng) {
  MirrorMessage msg;
  msg.twin_id = twin_id;
  msg.timestamp_ms = now_ms();
  if (dataset == "anoml_iot") {
    AnomlSample s = anoml_benign_sample(rng);
    msg.kind = MessageKind::state_update;
    msg.payload = {{"features",
                    {{"temperature", s.temperature},
                     {"humidity", s.humidity},
                     {"light", s.light},
                     {"loudness", s.loudness}}}};
  } else if (dataset == "ds2os") {
    std::vector<Record> one = generate_synthetic("ds2os", 1, 0.0, rng.u64());
    const Schema& schema = schema_by_name(dataset);
    json features = json::object();
    for (size_t ci : schema.feature_indices()) {
      const Column& col = schema.columns[ci];
      if (col.type == ColumnType::categorical) {
        // device side mirrors categoricals as pre-encoded codes
        features[col.name] = sm.pp.categorical_code(col.name, cell_text(one[0].cells[ci]));
      } else {
        features[col.name] = cell_number(one[0].cells[ci]);
      }
    }
    msg.kind = MessageKind::state_update;
    msg.payload = {{"features", std::move(features)}};
  } else {
    json features = json::object();
    for (const auto& [name, value] : iotid20_benign_flow(rng)) features[name] = value;
    msg.kind = MessageKind::flow_summary;
    msg.payload = {{"features", std::move(features)}, {"window_s", 10.0}};
  }
  return msg;
}

}  // namespace

LatencyReport bench_end_to_end(const LatencyScenario& scenario) {
  bool net_side = scenario.dataset == "iotid20";

  Hyperparams hp = default_hyperparams(scenario.model, scenario.seed);
  ScenarioModel sm = train_scenario_model(scenario.dataset, hp, scenario.train_n,
                                          scenario.anomaly_rate, scenario.seed);

  std::string work = scenario.work_dir.empty()
                         ? (std::filesystem::temp_directory_path() / "dtwin-bench").string()
                         : scenario.work_dir;
  std::filesystem::create_directories(work);
  std::string model_path =
      work + "/" + scenario.dataset + "_" + model_kind_name(scenario.model) + ".dtm";
  save_model(sm.model, model_path);

  FogStackOptions opts;
  opts.detection.data_schema = net_side ? "anoml_iot" : scenario.dataset;
  opts.detection.net_schema = "iotid20";
  opts.detection.endpoint_mode = true;
  opts.spool_dir = work + "/spool";
  FogStack stack(opts);
  stack.start();

  LatencyReport report;
  report.dataset = scenario.dataset;
  report.model = model_kind_name(scenario.model);
  report.mode = scenario.loaded ? "loaded" : "unloaded";

  try {
    ModelSlot& slot = net_side ? stack.net_slot() : stack.data_slot();
    slot.swap(sm.model, model_path);
    (net_side ? stack.net_endpoint() : stack.data_endpoint()).set_unloaded(!scenario.loaded);

    TwinDefinition def = bench_twin_for(scenario.dataset, sm);
    std::string twin_id = stack.registry().create_twin(def);

    TcpLineClient device;
    device.connect("127.0.0.1", stack.mirror_port());

    Rng rng(scenario.seed ^ 0xb33c);
    for (int run = 0; run < scenario.runs; ++run) {
      while (stack.detection().wait_verdict(0)) {
      }
      MirrorMessage stimulus = bench_stimulus(scenario.dataset, twin_id, sm, rng);
      MirrorMessage reply = device.request(stimulus, 10000);
      if (reply.kind != MessageKind::ack) {
        fail(Errc::stack_unavailable, "state change rejected: " + reply.payload.dump());
      }
      auto verdict = stack.detection().wait_verdict(10000);
      if (!verdict) fail(Errc::stack_unavailable, "no verdict within deadline");
      report.run_ms.push_back(verdict->latency_ms);
    }
  } catch (...) {
    stack.stop();
    throw;
  }
  stack.stop();

  StatSummary stat{report.run_ms};
  report.mean_ms = stat.mean();
  report.stderr_ms = stat.standard_error();
  return report;
}

std::string latency_reports_csv(const std::vector<LatencyReport>& reports) {
  std::ostringstream out;
  out << "dataset,classifier,mode,run,elapsed_ms,measured_from\n";
  for (const auto& r : reports) {
    for (size_t i = 0; i < r.run_ms.size(); ++i) {
      out << r.dataset << ',' << r.model << ',' << r.mode << ',' << (i + 1) << ','
          << fmt(r.run_ms[i], 4) << ',' << r.measured_from << '\n';
    }
    out << r.dataset << ',' << r.model << ',' << r.mode << ",mean," << fmt(r.mean_ms, 4) << ','
        << r.measured_from << '\n';
    out << r.dataset << ',' << r.model << ',' << r.mode << ",stderr," << fmt(r.stderr_ms, 4)
        << ',' << r.measured_from << '\n';
  }
  return out.str();
}

std::string latency_reports_table(const std::vector<LatencyReport>& reports) {
  std::ostringstream out;
  char line[256];
  snprintf(line, sizeof(line), "%-10s %-14s %-9s %6s %12s %12s\n", "dataset", "classifier",
           "mode", "runs", "mean (ms)", "stderr (ms)");
  out << line;
  for (const auto& r : reports) {
    snprintf(line, sizeof(line), "%-10s %-14s %-9s %6zu %12s %12s\n", r.dataset.c_str(),
             r.model.c_str(), r.mode.c_str(), r.run_ms.size(), fmt(r.mean_ms, 3).c_str(),
             fmt(r.stderr_ms, 3).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace dtwin
