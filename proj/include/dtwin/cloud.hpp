#pragma once

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dtwin/data.hpp"
#include "dtwin/ml.hpp"

namespace dtwin {

// Append-only labelled record log, one encoded record per line. Appends are
// durable (flushed and fsynced) and replay reproduces the exact sequence.
class GroundTruthStore {
 public:
  GroundTruthStore(std::string path, std::string schema_name);

  size_t append(const Record& r);  // SchemaMismatch, StorageFailure
  size_t count() const;
  std::vector<Record> replay(size_t limit = SIZE_MAX) const;

  const std::string& schema_name() const { return schema_name_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string schema_name_;
  mutable std::mutex m_;
  size_t count_ = 0;
};

struct TrainingJob {
  Hyperparams hp;
  std::string schema;
  size_t bound_count = 0;  // store prefix this job was trained on
  uint64_t split_seed = 0;
  double split_ratio = 0.8;
  TrainedModel model;
  Metrics metrics;         // held-out split
  double fit_time_ms = 0.0;
};

// Trains on the store's current prefix; reproducible from
// (prefix, hyperparams, split seed).
TrainingJob retrain(const GroundTruthStore& store, const Hyperparams& hp, uint64_t split_seed,
                    double split_ratio = 0.8, size_t min_per_class = 50);

// Ships a trained model to the fog push endpoint; returns the fog-assigned
// version. Throws FogUnreachable or SchemaMismatch (propagated from the fog).
uint64_t push_model(const std::string& host, int port, const TrainedModel& model,
                    const std::string& kind_label, int timeout_ms = 30000);

// Periodic retrain-and-push loop for one model kind.
class CloudTrainer {
 public:
  struct Options {
    std::string host = "127.0.0.1";
    int push_port = 7703;
    std::string kind_label = "data_anomaly";
    Hyperparams hp;
    uint64_t split_seed = 1;
    double split_ratio = 0.8;
    size_t min_per_class = 50;
    double interval_s = 60.0;
  };

  CloudTrainer(GroundTruthStore& store, Options opts);
  ~CloudTrainer();

  void start();
  void stop();
  // one retrain+push cycle; nullopt when the store lacks data
  std::optional<TrainingJob> run_once();

  uint64_t pushes() const { return pushes_.load(); }
  uint64_t failures() const { return failures_.load(); }
  uint64_t last_version() const { return last_version_.load(); }

 private:
  void loop();

  GroundTruthStore& store_;
  Options opts_;
  std::thread thread_;
  std::mutex m_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::atomic<bool> running_{false};
  std::atomic<uint64_t> pushes_{0};
  std::atomic<uint64_t> failures_{0};
  std::atomic<uint64_t> last_version_{0};
};

}  // namespace dtwin
