#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dtwin/common.hpp"

namespace dtwin {

enum class ColumnType { numeric, categorical, timestamp, label };

struct Column {
  std::string name;
  ColumnType type = ColumnType::numeric;
};

// Dataset layout for one scenario. Columns are ordered; exactly one carries
// the label. Header matching at ingest goes through `aliases` (normalized
// header text -> canonical column name) so the public CSV releases load
// without manual renaming.
struct Schema {
  std::string name;
  std::vector<Column> columns;
  std::set<std::string> positive_labels;  // lowercase
  std::set<std::string> benign_labels;    // lowercase
  std::map<std::string, std::string> aliases;

  size_t label_index() const;
  // numeric + categorical columns, in order (timestamp and label excluded)
  std::vector<size_t> feature_indices() const;
  size_t feature_dimension() const { return feature_indices().size(); }
  std::optional<size_t> column_index(const std::string& canonical) const;
};

const Schema& schema_by_name(const std::string& name);
std::vector<std::string> schema_names();

using Cell = std::variant<double, std::string>;

double cell_number(const Cell& c);  // throws on string cell
std::string cell_text(const Cell& c);

struct Record {
  std::string schema;
  std::vector<Cell> cells;  // aligned with Schema::columns; label cell keeps the raw string
  int label = 0;            // -1 = not yet labelled (behavior logs only)
  std::string sublabel;     // attack type when label == 1 and the source names one
  std::string origin;       // twin that produced the observation, when known
  int64_t id = 0;
};

// one-line JSON encoding shared by behavior logs and ground-truth stores
std::string record_to_line(const Record& r);
Record record_from_line(const std::string& line);

struct IngestReport {
  size_t rows_ok = 0;
  size_t rows_skipped = 0;
  std::vector<std::string> ignored_columns;
  std::vector<std::string> warnings;
};

std::vector<Record> ingest_csv(const Schema& schema, const std::string& path,
                               IngestReport* report = nullptr);
std::vector<Record> ingest_csv_stream(const Schema& schema, std::istream& in,
                                      IngestReport* report = nullptr);

std::string to_csv(const Schema& schema, const std::vector<Record>& records);
void export_csv(const Schema& schema, const std::vector<Record>& records, const std::string& path);

struct FeatureVector {
  Eigen::VectorXd x;
  int label = 0;
  int64_t record_id = 0;
};

// Min-max scaler over numeric columns plus per-categorical dictionaries.
// Fitted on the training split only; transform clamps serve-time values into
// [0,1]. Unseen categories map to the reserved code 0.
class Preprocessor {
 public:
  Preprocessor() = default;

  static Preprocessor fit(const Schema& schema, const std::vector<Record>& train);

  Eigen::VectorXd transform(const Record& r) const;
  FeatureVector transform_vector(const Record& r) const;
  std::vector<FeatureVector> transform_all(const std::vector<Record>& rs) const;

  bool fitted() const { return fitted_; }
  size_t dimension() const;
  const std::string& schema_name() const { return schema_name_; }
  std::string fingerprint() const;

  // code assigned at fit time; 0 when unseen (device-side pre-encoding)
  double categorical_code(const std::string& column, const std::string& value) const;

  std::string to_json_text() const;
  static Preprocessor from_json_text(const std::string& text);

 private:
  struct NumericStats {
    double min = 0.0;
    double max = 0.0;
  };
  void require_fitted() const;

  bool fitted_ = false;
  std::string schema_name_;
  // parallel to schema.feature_indices()
  std::vector<size_t> feature_cols_;
  std::map<size_t, NumericStats> numeric_;                          // by column index
  std::map<size_t, std::map<std::string, uint32_t>> dictionaries_;  // by column index
};

struct SplitResult {
  std::vector<Record> train;
  std::vector<Record> test;
};

// Stratified by label, deterministic under seed.
SplitResult split_records(const std::vector<Record>& records, double ratio, uint64_t seed);

// Seeded generators for desk-scale work. The positive count is exactly
// llround(anomaly_rate * n).
std::vector<Record> generate_synthetic(const std::string& scenario, size_t n, double anomaly_rate,
                                       uint64_t seed);

// Sensor bands shared between the anoml generator and the node simulator.
struct AnomlSample {
  double temperature = 0.0;
  double humidity = 0.0;
  double light = 0.0;
  double loudness = 0.0;
};
AnomlSample anoml_benign_sample(Rng& rng);
AnomlSample anoml_anomalous_sample(Rng& rng);

// Flow-window feature maps shared between the iotid20 generator and the
// gateway simulator. Keys are the iotid20 schema feature columns.
std::map<std::string, double> iotid20_benign_flow(Rng& rng);
std::map<std::string, double> iotid20_attack_flow(Rng& rng, const std::string& sublabel);

}  // namespace dtwin
