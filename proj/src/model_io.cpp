#include <bit>
#include <cmath>
#include <cstring>

#include "dtwin/ml.hpp"
#include "nlohmann/json.hpp"

namespace dtwin {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'D', 'T', 'M', '1'};
constexpr uint8_t kVersion = 1;

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_ += static_cast<char>(v); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_ += static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_ += static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void bytes(std::string_view s) { buf_.append(s.data(), s.size()); }
  std::string take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  uint8_t u8() { return take(1)[0]; }
  uint32_t u32() {
    auto s = take(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    auto s = take(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view take(size_t n) {
    if (pos_ + n > bytes_.size()) fail(Errc::corrupt_model_file, "truncated model file");
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  size_t remaining() const { return bytes_.size() - pos_; }
  size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  size_t pos_ = 0;
};

json hyperparams_to_json(const Hyperparams& hp) {
  return json{{"kind", model_kind_name(hp.kind)},
              {"rf_estimators", hp.rf_estimators},
              {"rf_max_depth", hp.rf_max_depth},
              {"rf_min_samples_split", hp.rf_min_samples_split},
              {"mlp_layers", hp.mlp_layers},
              {"mlp_epochs", hp.mlp_epochs},
              {"mlp_learning_rate", hp.mlp_learning_rate},
              {"mlp_batch", hp.mlp_batch},
              {"svm_lambda", hp.svm_lambda},
              {"svm_epochs", hp.svm_epochs},
              {"seed", hp.seed}};
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  hp.kind = model_kind_from_name(j.at("kind").get<std::string>());
  hp.rf_estimators = j.at("rf_estimators").get<int>();
  hp.rf_max_depth = j.at("rf_max_depth").get<int>();
  hp.rf_min_samples_split = j.at("rf_min_samples_split").get<int>();
  hp.mlp_layers = j.at("mlp_layers").get<std::vector<int>>();
  hp.mlp_epochs = j.at("mlp_epochs").get<int>();
  hp.mlp_learning_rate = j.at("mlp_learning_rate").get<double>();
  hp.mlp_batch = j.at("mlp_batch").get<int>();
  hp.svm_lambda = j.at("svm_lambda").get<double>();
  hp.svm_epochs = j.at("svm_epochs").get<int>();
  hp.seed = j.at("seed").get<uint64_t>();
  return hp;
}

std::vector<double> params_to_values(const TrainedModel& model) {
  std::vector<double> v;
  switch (model.kind) {
    case ModelKind::random_forest: {
      const auto& trees = model.forest().trees;
      v.push_back(static_cast<double>(trees.size()));
      for (const auto& t : trees) {
        v.push_back(static_cast<double>(t.nodes.size()));
        for (const auto& n : t.nodes) {
          v.push_back(n.leaf ? 1.0 : 0.0);
          v.push_back(static_cast<double>(n.feature));
          v.push_back(n.threshold);
          v.push_back(static_cast<double>(n.left));
          v.push_back(static_cast<double>(n.right));
          v.push_back(static_cast<double>(n.label));
        }
      }
      break;
    }
    case ModelKind::linear_svm: {
      const auto& p = model.svm();
      v.push_back(static_cast<double>(p.w.size()));
      for (Eigen::Index i = 0; i < p.w.size(); ++i) v.push_back(p.w[i]);
      v.push_back(p.b);
      break;
    }
    case ModelKind::mlp: {
      const auto& p = model.mlp();
      std::vector<int> widths = mlp_widths(p);
      v.push_back(static_cast<double>(p.W.size()));
      for (int w : widths) v.push_back(static_cast<double>(w));
      for (size_t l = 0; l < p.W.size(); ++l) {
        for (Eigen::Index r = 0; r < p.W[l].rows(); ++r) {
          for (Eigen::Index c = 0; c < p.W[l].cols(); ++c) v.push_back(p.W[l](r, c));
        }
        for (Eigen::Index r = 0; r < p.b[l].size(); ++r) v.push_back(p.b[l][r]);
      }
      break;
    }
  }
  return v;
}

class ValueReader {
 public:
  explicit ValueReader(const std::vector<double>& v) : v_(v) {}
  double next() {
    if (at_ >= v_.size()) fail(Errc::corrupt_model_file, "parameter payload too short");
    return v_[at_++];
  }
  int64_t next_int(int64_t lo, int64_t hi, const char* what) {
    double d = next();
    auto i = static_cast<int64_t>(std::llround(d));
    if (static_cast<double>(i) != d || i < lo || i > hi) {
      fail(Errc::corrupt_model_file, std::string("bad ") + what + " in parameter payload");
    }
    return i;
  }
  bool done() const { return at_ == v_.size(); }

 private:
  const std::vector<double>& v_;
  size_t at_ = 0;
};

void values_to_params(TrainedModel& model, const std::vector<double>& v) {
  ValueReader r(v);
  int d = model.input_dimension;
  switch (model.kind) {
    case ModelKind::random_forest: {
      ForestParams forest;
      int64_t n_trees = r.next_int(1, 1 << 20, "tree count");
      forest.trees.resize(static_cast<size_t>(n_trees));
      for (auto& t : forest.trees) {
        int64_t n_nodes = r.next_int(1, 1 << 26, "node count");
        t.nodes.resize(static_cast<size_t>(n_nodes));
        for (auto& n : t.nodes) {
          n.leaf = r.next_int(0, 1, "leaf flag") == 1;
          n.feature = static_cast<int>(r.next_int(-1, d - 1, "feature index"));
          n.threshold = r.next();
          n.left = static_cast<int>(r.next_int(-1, n_nodes - 1, "child index"));
          n.right = static_cast<int>(r.next_int(-1, n_nodes - 1, "child index"));
          n.label = static_cast<int>(r.next_int(0, 1, "leaf label"));
          if (!n.leaf && (n.feature < 0 || n.left < 0 || n.right < 0)) {
            fail(Errc::corrupt_model_file, "internal node with missing children");
          }
        }
      }
      model.params = std::move(forest);
      break;
    }
    case ModelKind::linear_svm: {
      SvmParams p;
      int64_t dim = r.next_int(1, 1 << 20, "weight dimension");
      if (dim != d) fail(Errc::corrupt_model_file, "weight dimension disagrees with metadata");
      p.w.resize(dim);
      for (Eigen::Index i = 0; i < dim; ++i) p.w[i] = r.next();
      p.b = r.next();
      model.params = std::move(p);
      break;
    }
    case ModelKind::mlp: {
      int64_t layers = r.next_int(1, 64, "layer count");
      std::vector<int> widths(static_cast<size_t>(layers) + 1);
      for (auto& w : widths) w = static_cast<int>(r.next_int(1, 1 << 20, "layer width"));
      if (widths.front() != d || widths.back() != 1) {
        fail(Errc::corrupt_model_file, "network widths disagree with metadata");
      }
      MlpParams p = mlp_zero(widths);
      for (size_t l = 0; l < p.W.size(); ++l) {
        for (Eigen::Index row = 0; row < p.W[l].rows(); ++row) {
          for (Eigen::Index c = 0; c < p.W[l].cols(); ++c) p.W[l](row, c) = r.next();
        }
        for (Eigen::Index row = 0; row < p.b[l].size(); ++row) p.b[l][row] = r.next();
      }
      model.params = std::move(p);
      break;
    }
  }
  if (!r.done()) fail(Errc::corrupt_model_file, "trailing values in parameter payload");
}

}  // namespace

void attach_preprocessor(TrainedModel& model, Preprocessor pp) {
  if (static_cast<size_t>(model.input_dimension) != pp.dimension()) {
    fail(Errc::schema_mismatch, "preprocessor dimension " + std::to_string(pp.dimension()) +
                                    " does not match model dimension " +
                                    std::to_string(model.input_dimension));
  }
  model.schema = pp.schema_name();
  model.fingerprint = pp.fingerprint();
  model.preprocessor = std::move(pp);
}

std::string model_to_bytes(const TrainedModel& model) {
  json meta;
  meta["kind"] = model_kind_name(model.kind);
  meta["input_dimension"] = model.input_dimension;
  meta["class_count"] = model.class_count;
  meta["schema"] = model.schema;
  meta["fingerprint"] = model.fingerprint;
  meta["seed"] = model.seed;
  meta["epochs"] = model.epochs;
  meta["hyperparams"] = hyperparams_to_json(model.hp);
  // fit wall-clock is intentionally absent: identical (data, params, seed)
  // must produce identical bytes
  if (model.preprocessor) {
    meta["preprocessor"] = model.preprocessor->to_json_text();
  } else {
    meta["preprocessor"] = nullptr;
  }
  std::string meta_text = meta.dump();

  std::vector<double> values = params_to_values(model);
  ByteWriter payload;
  for (double v : values) payload.f64(v);
  std::string payload_bytes = payload.take();

  ByteWriter out;
  out.bytes(std::string_view(kMagic, 4));
  out.u8(kVersion);
  out.u32(static_cast<uint32_t>(meta_text.size()));
  out.bytes(meta_text);
  out.u64(values.size());
  out.bytes(payload_bytes);
  out.u32(crc32(payload_bytes.data(), payload_bytes.size()));
  return out.take();
}

TrainedModel model_from_bytes(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.take(4) != std::string_view(kMagic, 4)) {
    fail(Errc::corrupt_model_file, "bad magic");
  }
  if (r.u8() != kVersion) fail(Errc::corrupt_model_file, "unsupported model file version");
  uint32_t meta_len = r.u32();
  std::string_view meta_text = r.take(meta_len);
  json meta = json::parse(meta_text, nullptr, false);
  if (meta.is_discarded()) fail(Errc::corrupt_model_file, "metadata is not valid JSON");

  TrainedModel model;
  try {
    model.kind = model_kind_from_name(meta.at("kind").get<std::string>());
    model.input_dimension = meta.at("input_dimension").get<int>();
    model.class_count = meta.at("class_count").get<int>();
    model.schema = meta.at("schema").get<std::string>();
    model.fingerprint = meta.at("fingerprint").get<std::string>();
    model.seed = meta.at("seed").get<uint64_t>();
    model.epochs = meta.at("epochs").get<int>();
    model.hp = hyperparams_from_json(meta.at("hyperparams"));
    if (!meta.at("preprocessor").is_null()) {
      model.preprocessor = Preprocessor::from_json_text(meta.at("preprocessor").get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(Errc::corrupt_model_file, std::string("bad metadata: ") + e.what());
  }
  if (model.input_dimension < 1) fail(Errc::corrupt_model_file, "bad input dimension");

  uint64_t count = r.u64();
  if (count > (1ull << 32)) fail(Errc::corrupt_model_file, "oversized parameter payload");
  std::string_view payload_bytes = r.take(count * 8);
  uint32_t stored_crc = r.u32();
  if (crc32(payload_bytes.data(), payload_bytes.size()) != stored_crc) {
    fail(Errc::corrupt_model_file, "payload checksum mismatch");
  }
  if (r.remaining() != 0) fail(Errc::corrupt_model_file, "trailing bytes after checksum");

  ByteReader pr(payload_bytes);
  std::vector<double> values(count);
  for (auto& v : values) v = pr.f64();
  values_to_params(model, values);
  return model;
}

size_t save_model(const TrainedModel& model, const std::string& path) {
  std::string bytes = model_to_bytes(model);
  write_file(path, bytes);
  return bytes.size();
}

TrainedModel load_model(const std::string& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    if (e.code() == Errc::missing_file) throw;
    fail(Errc::corrupt_model_file, path + ": unreadable");
  }
  return model_from_bytes(bytes);
}

}  // namespace dtwin
