#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "dtwin/bench.hpp"
#include "dtwin/cloud.hpp"
#include "dtwin/sim.hpp"
#include "dtwin/stack.hpp"

namespace {

using namespace dtwin;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

// 0 success, 1 user error, 2 runtime failure
int exit_code_for(Errc c) {
  switch (c) {
    case Errc::bind_failure:
    case Errc::connect_failure:
    case Errc::device_unreachable:
    case Errc::store_unavailable:
    case Errc::storage_failure:
    case Errc::fog_unreachable:
    case Errc::stack_unavailable:
      return 2;
    default:
      return 1;
  }
}

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = kMirrorPort;
};

Endpoint parse_endpoint(const std::string& text, int default_port) {
  Endpoint ep;
  ep.port = default_port;
  auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    if (!text.empty()) ep.host = text;
  } else {
    ep.host = text.substr(0, colon);
    ep.port = std::stoi(text.substr(colon + 1));
  }
  if (ep.host.empty()) ep.host = "127.0.0.1";
  return ep;
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "rf" || name == "random_forest") return ModelKind::random_forest;
  if (name == "svm" || name == "linear_svm") return ModelKind::linear_svm;
  if (name == "mlp") return ModelKind::mlp;
  fail(Errc::invalid_rate, "unknown classifier: " + name);
}

void print_metrics(const Metrics& m, const std::string& fmt) {
  if (fmt == "csv") {
    printf("accuracy,precision,recall,f1,tp,fp,fn,tn\n");
    printf("%.4f,%.4f,%.4f,%.4f,%lld,%lld,%lld,%lld\n", m.accuracy, m.precision, m.recall, m.f1,
           static_cast<long long>(m.tp), static_cast<long long>(m.fp),
           static_cast<long long>(m.fn), static_cast<long long>(m.tn));
  } else {
    printf("accuracy   %.4f\nprecision  %.4f\nrecall     %.4f\nf1         %.4f\n", m.accuracy,
           m.precision, m.recall, m.f1);
    printf("confusion  tp=%lld fp=%lld fn=%lld tn=%lld\n", static_cast<long long>(m.tp),
           static_cast<long long>(m.fp), static_cast<long long>(m.fn),
           static_cast<long long>(m.tn));
  }
}

Hyperparams hyperparams_from_flags(ModelKind kind, uint64_t seed, int rf_estimators,
                                   int rf_max_depth, int mlp_epochs, double mlp_lr, int mlp_batch,
                                   int svm_epochs, double svm_lambda) {
  Hyperparams hp = default_hyperparams(kind, seed);
  hp.rf_estimators = rf_estimators;
  hp.rf_max_depth = rf_max_depth;
  hp.mlp_epochs = mlp_epochs;
  hp.mlp_learning_rate = mlp_lr;
  hp.mlp_batch = mlp_batch;
  hp.svm_epochs = svm_epochs;
  hp.svm_lambda = svm_lambda;
  return hp;
}

TwinDefinition arduino_twin(int serial) {
  TwinDefinition def;
  def.definition_id = "kw.edu.paaet:arduino:1.0";
  def.attributes = {{"manufacturer", "Arduino Inc"},
                    {"model", "Arduino Uno"},
                    {"serialno", std::to_string(serial)}};
  def.feature_names = {"temperature", "humidity", "light", "loudness"};
  for (const auto& f : def.feature_names) def.initial_values[f] = 0.0;
  return def;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dtwin: fog digital twins with compromised-node detection"};
  app.require_subcommand(1);
  app.set_config("--config-file", "", "read option defaults from an ini/toml file");

  std::string format = "table";
  app.add_option("--format", format, "report format: table or csv")
      ->check(CLI::IsMember({"table", "csv"}));

  // shared option storage
  uint64_t seed = 42;
  std::string endpoint_text;
  std::string schema_name = "anoml_iot";
  std::string classifier = "mlp";
  int runs = 5;

  // ---- twin ----------------------------------------------------------------
  auto* twin = app.add_subcommand("twin", "create, inspect, update or release twins");
  twin->require_subcommand(1);

  auto* twin_create = twin->add_subcommand("create", "validate a twin configuration document");
  std::string twin_config_path;
  twin_create->add_option("--config", twin_config_path, "twin configuration JSON")
      ->required()
      ->check(CLI::ExistingFile);

  auto* twin_get = twin->add_subcommand("get", "read a twin snapshot from a running fog");
  std::string twin_id;
  twin_get->add_option("--endpoint", endpoint_text, "mirror endpoint host:port")
      ->envname("DTW_MIRROR_ENDPOINT");
  twin_get->add_option("--twin", twin_id, "twin id")->required();

  auto* twin_update = twin->add_subcommand("update", "push feature values to a running fog");
  std::vector<std::string> feature_args;
  twin_update->add_option("--endpoint", endpoint_text, "mirror endpoint host:port")
      ->envname("DTW_MIRROR_ENDPOINT");
  twin_update->add_option("--twin", twin_id, "twin id")->required();
  twin_update->add_option("--feature", feature_args, "name=value (repeatable)")->required();

  auto* twin_release = twin->add_subcommand("release", "lift a quarantine");
  twin_release->add_option("--endpoint", endpoint_text, "mirror endpoint host:port")
      ->envname("DTW_MIRROR_ENDPOINT");
  twin_release->add_option("--twin", twin_id, "twin id")->required();

  // ---- train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a classifier from a labelled CSV");
  std::string in_csv, out_model;
  double ratio = 0.8;
  int rf_estimators = 100, rf_max_depth = 16;
  int mlp_epochs = 50, mlp_batch = 32, svm_epochs = 30;
  double mlp_lr = 0.01, svm_lambda = 1e-3;
  train_cmd->add_option("--schema", schema_name, "dataset schema")
      ->check(CLI::IsMember(schema_names()));
  train_cmd->add_option("--model", classifier, "rf, svm or mlp")->required();
  train_cmd->add_option("--in", in_csv, "labelled CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_model, "model file to write")->required();
  train_cmd->add_option("--seed", seed, "seed for split and training");
  train_cmd->add_option("--ratio", ratio, "train fraction of the split");
  train_cmd->add_option("--rf-estimators", rf_estimators, "trees in the forest");
  train_cmd->add_option("--rf-max-depth", rf_max_depth, "tree depth cap");
  train_cmd->add_option("--mlp-epochs", mlp_epochs, "training epochs");
  train_cmd->add_option("--mlp-lr", mlp_lr, "learning rate");
  train_cmd->add_option("--mlp-batch", mlp_batch, "mini-batch size");
  train_cmd->add_option("--svm-epochs", svm_epochs, "training epochs");
  train_cmd->add_option("--svm-lambda", svm_lambda, "regularization strength");

  // ---- serve ---------------------------------------------------------------
  auto* serve_cmd = app.add_subcommand("serve", "run the fog stack");
  std::vector<std::string> twin_configs;
  int mirror_port = kMirrorPort, data_port = kDataClassifierPort, net_port = kNetClassifierPort,
      push_port = kModelPushPort;
  std::string data_model_path, net_model_path, sensor_log_path, network_log_path, spool_dir;
  std::string serve_mode = "endpoint";
  std::string data_schema = "anoml_iot", net_schema = "iotid20";
  int auto_twins = 0;
  double duration_s = 0.0;
  serve_cmd->add_option("--twin-config", twin_configs, "twin configuration JSON (repeatable)")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--auto-twins", auto_twins, "create N arduino twins, serialno 1..N");
  serve_cmd->add_option("--mirror-port", mirror_port, "mirror endpoint port")
      ->envname("DTW_MIRROR_PORT");
  serve_cmd->add_option("--data-port", data_port, "data-anomaly classifier port")
      ->envname("DTW_DATA_PORT");
  serve_cmd->add_option("--net-port", net_port, "network-intrusion classifier port")
      ->envname("DTW_NET_PORT");
  serve_cmd->add_option("--push-port", push_port, "model push port")->envname("DTW_PUSH_PORT");
  serve_cmd->add_option("--data-model", data_model_path, "initial data-anomaly model file")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--net-model", net_model_path, "initial network-intrusion model file")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--data-schema", data_schema, "schema served on the data side")
      ->check(CLI::IsMember(schema_names()));
  serve_cmd->add_option("--net-schema", net_schema, "schema served on the network side")
      ->check(CLI::IsMember(schema_names()));
  serve_cmd->add_option("--sensor-log", sensor_log_path, "sensor behavior log path");
  serve_cmd->add_option("--network-log", network_log_path, "network behavior log path");
  serve_cmd->add_option("--spool-dir", spool_dir, "where pushed model files are kept");
  serve_cmd->add_option("--mode", serve_mode, "endpoint or inmemory classification")
      ->check(CLI::IsMember({"endpoint", "inmemory"}));
  serve_cmd->add_option("--duration", duration_s, "seconds to run; 0 = until interrupted");

  // ---- cloud ---------------------------------------------------------------
  auto* cloud_cmd = app.add_subcommand("cloud", "periodic retrain-and-push loop");
  std::string store_path, push_endpoint_text = "127.0.0.1:7703", kind_label = "data_anomaly";
  double interval_s = 60.0;
  bool once = false;
  int min_per_class = 50;
  cloud_cmd->add_option("--store", store_path, "ground-truth store file")->required();
  cloud_cmd->add_option("--schema", schema_name, "store schema")
      ->check(CLI::IsMember(schema_names()));
  cloud_cmd->add_option("--model", classifier, "rf, svm or mlp");
  cloud_cmd->add_option("--kind", kind_label, "serving slot kind")
      ->check(CLI::IsMember({"data_anomaly", "network_intrusion"}));
  cloud_cmd->add_option("--push", push_endpoint_text, "fog push endpoint host:port")
      ->envname("DTW_PUSH_ENDPOINT");
  cloud_cmd->add_option("--interval", interval_s, "seconds between retrain cycles");
  cloud_cmd->add_option("--seed", seed, "split/training seed");
  cloud_cmd->add_option("--min-per-class", min_per_class, "samples required per class");
  cloud_cmd->add_flag("--once", once, "run a single retrain+push cycle and exit");

  // ---- simulate ------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "run node and gateway simulators");
  int nodes = 3, anomalous_node = 0, intrusive_node = 0;
  double period_s = 1.0, onset_s = 10.0, anomaly_duration_s = 1e9, run_s = 60.0, window_s = 10.0;
  bool with_gateway = false;
  sim_cmd->add_option("--endpoint", endpoint_text, "mirror endpoint host:port")
      ->envname("DTW_MIRROR_ENDPOINT");
  sim_cmd->add_option("--nodes", nodes, "node count");
  sim_cmd->add_option("--anomalous-node", anomalous_node,
                      "1-based node that turns data-anomalous; 0 = none");
  sim_cmd->add_option("--intrusive-node", intrusive_node,
                      "1-based node with intrusive traffic; 0 = none");
  sim_cmd->add_option("--period", period_s, "sensor emission period (s)");
  sim_cmd->add_option("--onset", onset_s, "misbehavior onset (s)");
  sim_cmd->add_option("--anomaly-duration", anomaly_duration_s, "misbehavior window (s)");
  sim_cmd->add_option("--duration", run_s, "run length (s)");
  sim_cmd->add_option("--window", window_s, "gateway flow window (s)");
  sim_cmd->add_flag("--gateway", with_gateway, "also emit flow summaries");
  sim_cmd->add_option("--seed", seed, "emission seed");

  // ---- label ---------------------------------------------------------------
  auto* label_cmd = app.add_subcommand("label", "assign ground-truth labels to behavior logs");
  std::string behavior_path, label_store_path, label_twin, sublabel;
  int label_value = 1, default_label = -1;
  int64_t from_ms = INT64_MIN, to_ms = INT64_MAX;
  label_cmd->add_option("--behavior", behavior_path, "behavior log to read")
      ->required()
      ->check(CLI::ExistingFile);
  label_cmd->add_option("--store", label_store_path, "ground-truth store to append to")
      ->required();
  label_cmd->add_option("--schema", schema_name, "record schema")
      ->check(CLI::IsMember(schema_names()));
  label_cmd->add_option("--label", label_value, "label for matching records (0 or 1)")
      ->check(CLI::Range(0, 1));
  label_cmd->add_option("--twin", label_twin, "only records from this twin");
  label_cmd->add_option("--from", from_ms, "window start, ms since epoch");
  label_cmd->add_option("--to", to_ms, "window end, ms since epoch");
  label_cmd->add_option("--sublabel", sublabel, "attack type recorded with label 1");
  label_cmd->add_option("--default-label", default_label,
                        "label for non-matching records; unset drops them")
      ->check(CLI::Range(0, 1));

  // ---- bench ---------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "timing and latency benchmarks");
  bench_cmd->require_subcommand(1);

  auto* bench_timings = bench_cmd->add_subcommand("timings", "model size/load/fit/classify");
  std::string model_file, data_csv;
  int synth_n = 2000;
  double synth_rate = 0.1;
  bench_timings->add_option("--dataset", schema_name, "scenario schema")
      ->check(CLI::IsMember(schema_names()));
  bench_timings->add_option("--classifier", classifier, "rf, svm, mlp or all");
  bench_timings->add_option("--runs", runs, "measurement repetitions");
  bench_timings->add_option("--seed", seed, "seed");
  bench_timings->add_option("--n", synth_n, "synthetic rows when no CSV given");
  bench_timings->add_option("--rate", synth_rate, "synthetic anomaly rate");
  bench_timings->add_option("--model-file", model_file, "measure an existing model file");
  bench_timings->add_option("--data", data_csv, "labelled CSV for fit/eval data")
      ->check(CLI::ExistingFile);

  auto* bench_e2e = bench_cmd->add_subcommand("e2e", "state-change-to-verdict latency");
  std::string mode = "loaded";
  std::string work_dir;
  bench_e2e->add_option("--dataset", schema_name, "scenario schema, or all")
      ->check(CLI::IsMember([] {
        auto names = schema_names();
        names.push_back("all");
        return names;
      }()));
  bench_e2e->add_option("--classifier", classifier, "rf, svm, mlp or all");
  bench_e2e->add_option("--mode", mode, "loaded, unloaded or both")
      ->check(CLI::IsMember({"loaded", "unloaded", "both"}));
  bench_e2e->add_option("--runs", runs, "measured runs per scenario");
  bench_e2e->add_option("--seed", seed, "seed");
  bench_e2e->add_option("--n", synth_n, "synthetic training rows");
  bench_e2e->add_option("--work-dir", work_dir, "directory for model files");

  // ---- datagen ---------------------------------------------------------------
  auto* datagen_cmd = app.add_subcommand("datagen", "write a seeded synthetic dataset CSV");
  std::string out_csv;
  datagen_cmd->add_option("--scenario", schema_name, "dataset schema")
      ->check(CLI::IsMember(schema_names()));
  datagen_cmd->add_option("--n", synth_n, "row count");
  datagen_cmd->add_option("--rate", synth_rate, "anomaly rate in [0,1]");
  datagen_cmd->add_option("--seed", seed, "generator seed");
  datagen_cmd->add_option("--out", out_csv, "CSV path")->required();

  // report-format and config options may appear after the subcommand
  std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* a) {
    a->fallthrough();
    for (CLI::App* sub : a->get_subcommands([](CLI::App*) { return true; })) {
      enable_fallthrough(sub);
    }
  };
  enable_fallthrough(&app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    // ---- twin --------------------------------------------------------------
    if (twin_create->parsed()) {
      TwinDefinition def = parse_twin_config(read_file(twin_config_path));
      TwinRegistry local;
      std::string id = local.create_twin(def);
      printf("%s\n", id.c_str());
      return 0;
    }
    if (twin_get->parsed()) {
      Endpoint ep = parse_endpoint(endpoint_text, kMirrorPort);
      TcpLineClient client;
      client.connect(ep.host, ep.port);
      MirrorMessage probe;
      probe.kind = MessageKind::state_update;
      probe.twin_id = twin_id;
      probe.timestamp_ms = now_ms();
      MirrorMessage reply = client.request(probe);
      if (reply.kind == MessageKind::error) {
        fprintf(stderr, "%s\n", reply.payload.value("message", "error").c_str());
        return 1;
      }
      printf("%s\n", reply.payload.dump(1).c_str());
      return 0;
    }
    if (twin_update->parsed()) {
      Endpoint ep = parse_endpoint(endpoint_text, kMirrorPort);
      nlohmann::json features = nlohmann::json::object();
      for (const auto& arg : feature_args) {
        auto eq = arg.find('=');
        if (eq == std::string::npos) fail(Errc::malformed_config, "--feature needs name=value");
        features[arg.substr(0, eq)] = std::stod(arg.substr(eq + 1));
      }
      TcpLineClient client;
      client.connect(ep.host, ep.port);
      MirrorMessage update;
      update.kind = MessageKind::state_update;
      update.twin_id = twin_id;
      update.payload = {{"features", std::move(features)}};
      update.timestamp_ms = now_ms();
      MirrorMessage reply = client.request(update);
      if (reply.kind == MessageKind::error) {
        fprintf(stderr, "%s\n", reply.payload.value("message", "error").c_str());
        return 1;
      }
      printf("revision %s\n", reply.payload["revision"].dump().c_str());
      return 0;
    }
    if (twin_release->parsed()) {
      Endpoint ep = parse_endpoint(endpoint_text, kMirrorPort);
      TcpLineClient client;
      client.connect(ep.host, ep.port);
      MirrorMessage release;
      release.kind = MessageKind::action;
      release.twin_id = twin_id;
      release.payload = {{"action", "release"}};
      release.timestamp_ms = now_ms();
      MirrorMessage reply = client.request(release);
      if (reply.kind == MessageKind::error) {
        fprintf(stderr, "%s\n", reply.payload.value("message", "error").c_str());
        return 1;
      }
      printf("released %s\n", twin_id.c_str());
      return 0;
    }

    // ---- train -------------------------------------------------------------
    if (train_cmd->parsed()) {
      const Schema& schema = schema_by_name(schema_name);
      IngestReport rep;
      std::vector<Record> records = ingest_csv(schema, in_csv, &rep);
      if (rep.rows_skipped > 0) {
        fprintf(stderr, "skipped %zu malformed row(s)\n", rep.rows_skipped);
      }
      SplitResult split = split_records(records, ratio, seed);
      Preprocessor pp = Preprocessor::fit(schema, split.train);
      Dataset train = Dataset::from_vectors(pp.transform_all(split.train));
      Dataset test = Dataset::from_vectors(pp.transform_all(split.test));
      Hyperparams hp =
          hyperparams_from_flags(parse_model_kind(classifier), seed, rf_estimators, rf_max_depth,
                                 mlp_epochs, mlp_lr, mlp_batch, svm_epochs, svm_lambda);
      TrainedModel model = train_model(train, hp);
      attach_preprocessor(model, pp);
      size_t bytes = save_model(model, out_model);
      Metrics m = evaluate(model, test);
      fprintf(stderr, "trained %s on %lld rows in %.1f ms; wrote %zu bytes to %s\n",
              model_kind_name(model.kind), static_cast<long long>(train.rows()),
              model.fit_time_ms, bytes, out_model.c_str());
      print_metrics(m, format);
      return 0;
    }

    // ---- serve -------------------------------------------------------------
    if (serve_cmd->parsed()) {
      FogStackOptions opts;
      opts.mirror_port = mirror_port;
      opts.data_port = data_port;
      opts.net_port = net_port;
      opts.push_port = push_port;
      opts.detection.data_schema = data_schema;
      opts.detection.net_schema = net_schema;
      opts.detection.endpoint_mode = serve_mode == "endpoint";
      opts.spool_dir = spool_dir.empty() ? "dtwin-spool" : spool_dir;
      opts.sensor_log_path = sensor_log_path;
      opts.network_log_path = network_log_path;
      FogStack stack(opts);
      stack.start();
      for (const auto& path : twin_configs) {
        std::string id = stack.registry().create_twin(parse_twin_config(read_file(path)));
        printf("twin %s\n", id.c_str());
      }
      for (int i = 1; i <= auto_twins; ++i) {
        printf("twin %s\n", stack.registry().create_twin(arduino_twin(i)).c_str());
      }
      if (!data_model_path.empty()) {
        stack.data_slot().swap(load_model(data_model_path), data_model_path);
        printf("data model v%llu from %s\n",
               static_cast<unsigned long long>(stack.data_slot().current()->version),
               data_model_path.c_str());
      }
      if (!net_model_path.empty()) {
        stack.net_slot().swap(load_model(net_model_path), net_model_path);
        printf("net model v%llu from %s\n",
               static_cast<unsigned long long>(stack.net_slot().current()->version),
               net_model_path.c_str());
      }
      printf("mirror :%d  data :%d  net :%d  push :%d\n", stack.mirror_port(), stack.data_port(),
             stack.net_port(), stack.push_port());
      fflush(stdout);
      auto started = std::chrono::steady_clock::now();
      while (!g_interrupted.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        if (duration_s > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >=
                duration_s) {
          break;
        }
      }
      stack.stop();
      return 0;
    }

    // ---- cloud -------------------------------------------------------------
    if (cloud_cmd->parsed()) {
      Endpoint push_ep = parse_endpoint(push_endpoint_text, kModelPushPort);
      GroundTruthStore store(store_path, schema_name);
      CloudTrainer::Options opts;
      opts.host = push_ep.host;
      opts.push_port = push_ep.port;
      opts.kind_label = kind_label;
      opts.hp = default_hyperparams(parse_model_kind(classifier), seed);
      opts.split_seed = seed;
      opts.interval_s = interval_s;
      opts.min_per_class = static_cast<size_t>(min_per_class);
      CloudTrainer trainer(store, opts);
      if (once) {
        auto job = trainer.run_once();
        if (!job) {
          fprintf(stderr, "insufficient data in %s\n", store_path.c_str());
          return 1;
        }
        printf("pushed %s v%llu (f1 %.4f on held-out split)\n", kind_label.c_str(),
               static_cast<unsigned long long>(trainer.last_version()), job->metrics.f1);
        return 0;
      }
      trainer.start();
      while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      trainer.stop();
      printf("pushes %llu failures %llu\n", static_cast<unsigned long long>(trainer.pushes()),
             static_cast<unsigned long long>(trainer.failures()));
      return 0;
    }

    // ---- simulate ----------------------------------------------------------
    if (sim_cmd->parsed()) {
      Endpoint ep = parse_endpoint(endpoint_text, kMirrorPort);
      std::vector<NodeProfile> profiles;
      for (int i = 1; i <= nodes; ++i) {
        NodeProfile p;
        p.twin = arduino_twin(i);
        p.period_s = period_s;
        p.onset_s = onset_s;
        p.duration_s = anomaly_duration_s;
        p.seed = seed + static_cast<uint64_t>(i);
        bool anomalous = i == anomalous_node;
        bool intrusive = i == intrusive_node;
        p.behavior = anomalous && intrusive ? NodeBehavior::mixed
                     : anomalous           ? NodeBehavior::data_anomalous
                     : intrusive           ? NodeBehavior::intrusive
                                           : NodeBehavior::benign;
        profiles.push_back(std::move(p));
      }
      std::vector<NodeRunSummary> summaries(profiles.size());
      std::vector<std::thread> threads;
      for (size_t i = 0; i < profiles.size(); ++i) {
        threads.emplace_back([&, i] {
          NodeSimulator sim(profiles[i], ep.host, ep.port);
          summaries[i] = sim.run_for(run_s);
        });
      }
      GatewayRunSummary gw;
      if (with_gateway) {
        GatewaySimulator gateway(profiles, ep.host, ep.port, window_s);
        gw = gateway.run_for(run_s);
      }
      for (auto& t : threads) t.join();
      for (const auto& s : summaries) {
        printf("%s behavior=%s sent=%llu acked=%llu refused=%llu actions=%llu final=%s\n",
               s.twin_id.c_str(),
               node_behavior_name(profiles[&s - summaries.data()].behavior),
               static_cast<unsigned long long>(s.sent), static_cast<unsigned long long>(s.acked),
               static_cast<unsigned long long>(s.refused),
               static_cast<unsigned long long>(s.actions_received),
               s.final_mode == NodeMode::running      ? "running"
               : s.final_mode == NodeMode::quarantined ? "quarantined"
                                                       : "shutdown");
      }
      if (with_gateway) {
        printf("gateway windows=%llu sent=%llu acked=%llu refused=%llu\n",
               static_cast<unsigned long long>(gw.windows),
               static_cast<unsigned long long>(gw.sent),
               static_cast<unsigned long long>(gw.acked),
               static_cast<unsigned long long>(gw.refused));
      }
      return 0;
    }

    // ---- label -------------------------------------------------------------
    if (label_cmd->parsed()) {
      const Schema& schema = schema_by_name(schema_name);
      size_t ts_col = 0;
      for (size_t i = 0; i < schema.columns.size(); ++i) {
        if (schema.columns[i].type == ColumnType::timestamp) ts_col = i;
      }
      GroundTruthStore store(label_store_path, schema_name);
      std::ifstream in(behavior_path);
      std::string line;
      size_t matched = 0, defaulted = 0, skipped = 0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        Record r = record_from_line(line);
        if (r.schema != schema_name) {
          ++skipped;
          continue;
        }
        double ts = 0.0;
        if (ts_col < r.cells.size()) {
          if (const double* d = std::get_if<double>(&r.cells[ts_col])) ts = *d;
        }
        bool in_window = ts >= static_cast<double>(from_ms) && ts <= static_cast<double>(to_ms);
        bool twin_match = label_twin.empty() || r.origin == label_twin;
        if (in_window && twin_match) {
          r.label = label_value;
          r.sublabel = label_value == 1 ? sublabel : "";
          ++matched;
        } else if (default_label >= 0) {
          r.label = default_label;
          r.sublabel = "";
          ++defaulted;
        } else {
          ++skipped;
          continue;
        }
        r.cells[schema.label_index()] = std::string(r.label == 1 ? "1" : "0");
        store.append(r);
      }
      printf("labelled %zu matching, %zu defaulted, %zu skipped; store now %zu records\n",
             matched, defaulted, skipped, store.count());
      return 0;
    }

    // ---- bench timings -------------------------------------------------------
    if (bench_timings->parsed()) {
      std::vector<std::string> kinds =
          classifier == "all" ? std::vector<std::string>{"rf", "svm", "mlp"}
                              : std::vector<std::string>{classifier};
      std::vector<TimingReport> reports;
      std::string work = std::filesystem::temp_directory_path() / "dtwin-timings";
      std::filesystem::create_directories(work);
      for (const auto& kind_name : kinds) {
        ModelKind kind = parse_model_kind(kind_name);
        std::string path = model_file;
        Dataset fit_data, eval_data;
        if (!data_csv.empty()) {
          const Schema& schema = schema_by_name(schema_name);
          std::vector<Record> records = ingest_csv(schema, data_csv);
          SplitResult split = split_records(records, 0.8, seed);
          Preprocessor pp = Preprocessor::fit(schema, split.train);
          fit_data = Dataset::from_vectors(pp.transform_all(split.train));
          eval_data = Dataset::from_vectors(pp.transform_all(split.test));
          if (path.empty()) {
            TrainedModel model = train_model(fit_data, default_hyperparams(kind, seed));
            attach_preprocessor(model, pp);
            path = work + "/" + schema_name + "_" + kind_name + ".dtm";
            save_model(model, path);
          }
        } else {
          ScenarioModel sm = train_scenario_model(schema_name, default_hyperparams(kind, seed),
                                                  synth_n, synth_rate, seed);
          fit_data = sm.train;
          eval_data = sm.test;
          if (path.empty()) {
            path = work + "/" + schema_name + "_" + kind_name + ".dtm";
            save_model(sm.model, path);
          }
        }
        reports.push_back(bench_model_timings(path, fit_data, eval_data, runs));
      }
      fputs((format == "csv" ? timing_reports_csv(reports) : timing_reports_table(reports))
                .c_str(),
            stdout);
      return 0;
    }

    // ---- bench e2e -----------------------------------------------------------
    if (bench_e2e->parsed()) {
      std::vector<std::string> datasets = schema_name == "all"
                                              ? schema_names()
                                              : std::vector<std::string>{schema_name};
      std::vector<std::string> kinds =
          classifier == "all" ? std::vector<std::string>{"rf", "svm", "mlp"}
                              : std::vector<std::string>{classifier};
      std::vector<bool> modes;
      if (mode == "both") modes = {true, false};
      else modes = {mode == "loaded"};

      std::vector<LatencyReport> reports;
      for (const auto& ds : datasets) {
        for (const auto& kind_name : kinds) {
          for (bool loaded : modes) {
            LatencyScenario sc;
            sc.dataset = ds;
            sc.model = parse_model_kind(kind_name);
            sc.loaded = loaded;
            sc.runs = runs;
            sc.seed = seed;
            sc.train_n = synth_n;
            sc.work_dir = work_dir;
            reports.push_back(bench_end_to_end(sc));
          }
        }
      }
      fputs((format == "csv" ? latency_reports_csv(reports) : latency_reports_table(reports))
                .c_str(),
            stdout);
      return 0;
    }

    // ---- datagen -------------------------------------------------------------
    if (datagen_cmd->parsed()) {
      const Schema& schema = schema_by_name(schema_name);
      std::vector<Record> records =
          generate_synthetic(schema_name, static_cast<size_t>(synth_n), synth_rate, seed);
      export_csv(schema, records, out_csv);
      printf("wrote %d rows (%lld anomalous) to %s\n", synth_n,
             static_cast<long long>(std::count_if(records.begin(), records.end(),
                                                  [](const Record& r) { return r.label == 1; })),
             out_csv.c_str());
      return 0;
    }
  } catch (const Error& e) {
    fprintf(stderr, "%s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  return 1;
}
