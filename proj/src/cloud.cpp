#include "dtwin/cloud.hpp"

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dtwin/net.hpp"

namespace dtwin {

GroundTruthStore::GroundTruthStore(std::string path, std::string schema_name)
    : path_(std::move(path)), schema_name_(std::move(schema_name)) {
  auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  if (std::filesystem::exists(path_)) {
    count_ = replay().size();
  }
}

size_t GroundTruthStore::append(const Record& r) {
  if (r.schema != schema_name_) {
    fail(Errc::schema_mismatch,
         "store holds " + schema_name_ + " records, got " + r.schema);
  }
  std::string line = record_to_line(r) + "\n";
  std::lock_guard lk(m_);
  FILE* f = std::fopen(path_.c_str(), "ab");
  if (!f) fail(Errc::storage_failure, "cannot open " + path_);
  bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size();
  ok = std::fflush(f) == 0 && ok;
  ok = ::fsync(fileno(f)) == 0 && ok;  // survive an unclean shutdown
  std::fclose(f);
  if (!ok) fail(Errc::storage_failure, "append to " + path_ + " failed");
  return ++count_;
}

size_t GroundTruthStore::count() const {
  std::lock_guard lk(m_);
  return count_;
}

std::vector<Record> GroundTruthStore::replay(size_t limit) const {
  std::vector<Record> out;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return out;
  std::string line;
  while (out.size() < limit && std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_line(line));
    } catch (const Error& e) {
      fail(Errc::storage_failure, path_ + " is corrupt: " + e.what());
    }
  }
  return out;
}

TrainingJob retrain(const GroundTruthStore& store, const Hyperparams& hp, uint64_t split_seed,
                    double split_ratio, size_t min_per_class) {
  TrainingJob job;
  job.hp = hp;
  job.schema = store.schema_name();
  job.split_seed = split_seed;
  job.split_ratio = split_ratio;
  job.bound_count = store.count();

  std::vector<Record> all = store.replay(job.bound_count);
  std::vector<Record> labelled;
  size_t positives = 0, negatives = 0;
  for (auto& r : all) {
    if (r.label == 0) ++negatives;
    else if (r.label == 1) ++positives;
    else continue;
    labelled.push_back(std::move(r));
  }
  if (positives < min_per_class || negatives < min_per_class) {
    fail(Errc::insufficient_data, "need >= " + std::to_string(min_per_class) +
                                      " per class, have " + std::to_string(negatives) + "/" +
                                      std::to_string(positives));
  }

  SplitResult split = split_records(labelled, split_ratio, split_seed);
  const Schema& schema = schema_by_name(store.schema_name());
  Preprocessor pp = Preprocessor::fit(schema, split.train);
  Dataset train = Dataset::from_vectors(pp.transform_all(split.train));
  Dataset test = Dataset::from_vectors(pp.transform_all(split.test));

  job.model = train_model(train, hp);
  attach_preprocessor(job.model, pp);
  job.metrics = evaluate(job.model, test);
  job.fit_time_ms = job.model.fit_time_ms;
  return job;
}

uint64_t push_model(const std::string& host, int port, const TrainedModel& model,
                    const std::string& kind_label, int timeout_ms) {
  TcpLineClient client;
  try {
    client.connect(host, port);
  } catch (const Error& e) {
    fail(Errc::fog_unreachable, e.what());
  }
  MirrorMessage msg;
  msg.kind = MessageKind::model_push;
  msg.payload = {{"kind", kind_label}, {"model_b64", base64_encode(model_to_bytes(model))}};
  msg.timestamp_ms = now_ms();

  MirrorMessage reply;
  try {
    reply = client.request(msg, timeout_ms);
  } catch (const Error& e) {
    fail(Errc::fog_unreachable, e.what());
  }
  if (reply.kind == MessageKind::error) {
    std::string code = reply.payload.value("code", "");
    std::string detail = reply.payload.value("message", "push rejected");
    if (code == errc_name(Errc::schema_mismatch)) fail(Errc::schema_mismatch, detail);
    if (code == errc_name(Errc::corrupt_model_file)) fail(Errc::corrupt_model_file, detail);
    fail(Errc::fog_unreachable, detail);
  }
  if (reply.kind != MessageKind::ack || !reply.payload.contains("version")) {
    fail(Errc::fog_unreachable, "unexpected push reply");
  }
  return reply.payload["version"].get<uint64_t>();
}

CloudTrainer::CloudTrainer(GroundTruthStore& store, Options opts)
    : store_(store), opts_(std::move(opts)) {}

CloudTrainer::~CloudTrainer() { stop(); }

std::optional<TrainingJob> CloudTrainer::run_once() {
  TrainingJob job;
  try {
    job = retrain(store_, opts_.hp, opts_.split_seed, opts_.split_ratio, opts_.min_per_class);
  } catch (const Error& e) {
    if (e.code() == Errc::insufficient_data) return std::nullopt;
    throw;
  }
  uint64_t version =
      push_model(opts_.host, opts_.push_port, job.model, opts_.kind_label);
  last_version_.store(version);
  pushes_.fetch_add(1);
  return job;
}

void CloudTrainer::loop() {
  std::unique_lock lk(m_);
  while (!stopping_) {
    lk.unlock();
    try {
      run_once();
    } catch (const Error& e) {
      failures_.fetch_add(1);
      fprintf(stderr, "retrain/push cycle failed: %s\n", e.what());
    }
    lk.lock();
    cv_.wait_for(lk, std::chrono::duration<double>(opts_.interval_s), [&] { return stopping_; });
  }
}

void CloudTrainer::start() {
  if (running_.exchange(true)) return;
  {
    std::lock_guard lk(m_);
    stopping_ = false;
  }
  thread_ = std::thread([this] { loop(); });
}

void CloudTrainer::stop() {
  if (!running_.exchange(false)) return;
  {
    std::lock_guard lk(m_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

}  // namespace dtwin
