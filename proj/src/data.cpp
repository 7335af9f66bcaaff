#include "dtwin/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"

namespace dtwin {

using json = nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
  char buf[32];
  // integral values print without an exponent; both forms parse back exactly
  if (v == std::floor(v) && std::abs(v) < 9.0e15) {
    snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
  }
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
  if (b == e) return false;
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e && std::isfinite(out);
}

std::string normalize_header(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool prev_us = false;
  for (char c : raw) {
    char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if ((l >= 'a' && l <= 'z') || (l >= '0' && l <= '9')) {
      out += l;
      prev_us = false;
    } else if (!out.empty() && !prev_us) {
      out += '_';
      prev_us = true;
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Schema make_anoml_schema() {
  Schema s;
  s.name = "anoml_iot";
  s.columns = {{"timestamp", ColumnType::timestamp},
               {"temperature", ColumnType::numeric},
               {"humidity", ColumnType::numeric},
               {"light", ColumnType::numeric},
               {"loudness", ColumnType::numeric},
               {"label", ColumnType::label}};
  s.positive_labels = {"anomalous", "anomaly", "1"};
  s.benign_labels = {"normal", "benign", "0"};
  s.aliases = {{"time", "timestamp"},       {"date_time", "timestamp"},
               {"temp", "temperature"},     {"temperature_c", "temperature"},
               {"humidity_percent", "humidity"}, {"hum", "humidity"},
               {"light_level", "light"},    {"sound", "loudness"},
               {"noise", "loudness"},       {"class", "label"}};
  return s;
}

Schema make_ds2os_schema() {
  Schema s;
  s.name = "ds2os";
  s.columns = {{"timestamp", ColumnType::timestamp},
               {"source_id", ColumnType::categorical},
               {"source_address", ColumnType::categorical},
               {"source_type", ColumnType::categorical},
               {"source_location", ColumnType::categorical},
               {"dest_service_address", ColumnType::categorical},
               {"dest_service_type", ColumnType::categorical},
               {"dest_location", ColumnType::categorical},
               {"accessed_node_address", ColumnType::categorical},
               {"accessed_node_type", ColumnType::categorical},
               {"operation", ColumnType::categorical},
               {"value", ColumnType::numeric},
               {"label", ColumnType::label}};
  s.positive_labels = {"anomalous", "1", "probing", "dos", "dosattack",
                       "malitiouscontrol", "malicious_control", "malitiousoperation",
                       "malicious_operation", "scan", "spying", "wrongsetup", "wrong_setup"};
  s.benign_labels = {"normal", "benign", "0"};
  s.aliases = {{"source_i_d", "source_id"},
               {"sourceid", "source_id"},
               {"source_add", "source_address"},
               {"sourceaddress", "source_address"},
               {"sourcetype", "source_type"},
               {"sourcelocation", "source_location"},
               {"destination_service_address", "dest_service_address"},
               {"destinationserviceaddress", "dest_service_address"},
               {"destination_service_type", "dest_service_type"},
               {"destinationservicetype", "dest_service_type"},
               {"destination_location", "dest_location"},
               {"destinationlocation", "dest_location"},
               {"accessed_node_addre", "accessed_node_address"},
               {"accessednodeaddress", "accessed_node_address"},
               {"accessednodetype", "accessed_node_type"},
               {"normality", "label"},
               {"class", "label"}};
  return s;
}

Schema make_iotid20_schema() {
  Schema s;
  s.name = "iotid20";
  const char* flow_features[] = {
      "flow_duration",   "tot_fwd_pkts",     "tot_bwd_pkts",    "totlen_fwd_pkts",
      "totlen_bwd_pkts", "fwd_pkt_len_max",  "fwd_pkt_len_min", "fwd_pkt_len_mean",
      "bwd_pkt_len_max", "bwd_pkt_len_min",  "bwd_pkt_len_mean", "flow_byts_per_s",
      "flow_pkts_per_s", "flow_iat_mean",    "flow_iat_std",    "flow_iat_max",
      "flow_iat_min",    "syn_flag_cnt",     "ack_flag_cnt",    "rst_flag_cnt"};
  s.columns.push_back({"timestamp", ColumnType::timestamp});
  for (const char* f : flow_features) s.columns.push_back({f, ColumnType::numeric});
  s.columns.push_back({"label", ColumnType::label});
  s.positive_labels = {"anomaly", "anomalous", "malicious", "attack", "1",
                       "mirai",   "dos",       "scan",      "mitm_arp_spoofing",
                       "mitm arp spoofing"};
  s.benign_labels = {"normal", "benign", "0"};
  s.aliases = {{"flow_byts_s", "flow_byts_per_s"}, {"flow_bytes_s", "flow_byts_per_s"},
               {"flow_pkts_s", "flow_pkts_per_s"}, {"flow_packets_s", "flow_pkts_per_s"},
               {"total_fwd_pkts", "tot_fwd_pkts"}, {"total_bwd_pkts", "tot_bwd_pkts"},
               {"class", "label"}};
  return s;
}

const std::vector<Schema>& all_schemas() {
  static const std::vector<Schema> schemas = {make_anoml_schema(), make_ds2os_schema(),
                                              make_iotid20_schema()};
  return schemas;
}

// sublabels that are just a generic positive marker, not an attack name
bool generic_positive(const std::string& lower) {
  return lower == "1" || lower == "anomaly" || lower == "anomalous" || lower == "malicious" ||
         lower == "attack";
}

}  // namespace

size_t Schema::label_index() const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].type == ColumnType::label) return i;
  }
  fail(Errc::header_mismatch, "schema " + name + " has no label column");
}

std::vector<size_t> Schema::feature_indices() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].type == ColumnType::numeric || columns[i].type == ColumnType::categorical) {
      out.push_back(i);
    }
  }
  return out;
}

std::optional<size_t> Schema::column_index(const std::string& canonical) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == canonical) return i;
  }
  return std::nullopt;
}

const Schema& schema_by_name(const std::string& name) {
  for (const auto& s : all_schemas()) {
    if (s.name == name) return s;
  }
  fail(Errc::header_mismatch, "unknown schema: " + name);
}

std::vector<std::string> schema_names() {
  std::vector<std::string> out;
  for (const auto& s : all_schemas()) out.push_back(s.name);
  return out;
}

double cell_number(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return *d;
  double v = 0.0;
  if (parse_double(std::get<std::string>(c), v)) return v;
  fail(Errc::schema_mismatch, "expected numeric cell, got '" + std::get<std::string>(c) + "'");
}

std::string cell_text(const Cell& c) {
  if (const std::string* s = std::get_if<std::string>(&c)) return *s;
  return format_double(std::get<double>(c));
}

std::string record_to_line(const Record& r) {
  json j;
  j["schema"] = r.schema;
  j["id"] = r.id;
  j["label"] = r.label;
  j["sublabel"] = r.sublabel;
  j["origin"] = r.origin;
  json cells = json::array();
  for (const auto& c : r.cells) {
    if (const double* d = std::get_if<double>(&c)) {
      cells.push_back(*d);
    } else {
      cells.push_back(std::get<std::string>(c));
    }
  }
  j["cells"] = std::move(cells);
  return j.dump();
}

Record record_from_line(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(Errc::malformed_message, "bad record line");
  Record r;
  try {
    r.schema = j.at("schema").get<std::string>();
    r.id = j.at("id").get<int64_t>();
    r.label = j.at("label").get<int>();
    r.sublabel = j.at("sublabel").get<std::string>();
    r.origin = j.value("origin", "");
    for (const auto& c : j.at("cells")) {
      if (c.is_number()) {
        r.cells.emplace_back(c.get<double>());
      } else if (c.is_string()) {
        r.cells.emplace_back(c.get<std::string>());
      } else {
        fail(Errc::malformed_message, "bad cell type in record line");
      }
    }
  } catch (const json::exception& e) {
    fail(Errc::malformed_message, std::string("bad record line: ") + e.what());
  }
  return r;
}

namespace {

// RFC-4180 row reader; quoted fields may span lines.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<Record> ingest_csv_stream(const Schema& schema, std::istream& in,
                                      IngestReport* report) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;

  std::vector<std::string> header;
  if (!read_csv_row(in, header)) fail(Errc::header_mismatch, "empty input, no header row");

  // Map each header position to a schema column (or ignore it). The
  // recognized columns must appear complete and in schema order.
  std::vector<int> col_for_pos(header.size(), -1);
  std::vector<size_t> recognized;
  for (size_t pos = 0; pos < header.size(); ++pos) {
    std::string norm = normalize_header(header[pos]);
    auto alias = schema.aliases.find(norm);
    std::string canonical = alias != schema.aliases.end() ? alias->second : norm;
    auto idx = schema.column_index(canonical);
    if (!idx) {
      rep.ignored_columns.push_back(header[pos]);
      continue;
    }
    if (std::find(recognized.begin(), recognized.end(), *idx) != recognized.end()) {
      fail(Errc::header_mismatch, "duplicate column in header: " + header[pos]);
    }
    col_for_pos[pos] = static_cast<int>(*idx);
    recognized.push_back(*idx);
  }
  if (recognized.size() != schema.columns.size()) {
    fail(Errc::header_mismatch, "header covers " + std::to_string(recognized.size()) + " of " +
                                    std::to_string(schema.columns.size()) + " schema columns");
  }
  if (!std::is_sorted(recognized.begin(), recognized.end())) {
    fail(Errc::header_mismatch, "schema columns out of order in header");
  }
  if (!rep.ignored_columns.empty()) {
    rep.warnings.push_back("ignored " + std::to_string(rep.ignored_columns.size()) +
                           " unrecognized column(s)");
  }

  std::vector<Record> records;
  std::vector<std::string> fields;
  size_t row_no = 0;
  size_t data_rows = 0;
  while (read_csv_row(in, fields)) {
    ++row_no;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    ++data_rows;
    if (fields.size() != header.size()) {
      ++rep.rows_skipped;
      continue;
    }
    Record r;
    r.schema = schema.name;
    r.cells.resize(schema.columns.size());
    r.id = static_cast<int64_t>(row_no);
    bool ok = true;
    for (size_t pos = 0; pos < fields.size() && ok; ++pos) {
      if (col_for_pos[pos] < 0) continue;
      size_t ci = static_cast<size_t>(col_for_pos[pos]);
      const Column& col = schema.columns[ci];
      const std::string& raw = fields[pos];
      switch (col.type) {
        case ColumnType::numeric: {
          double v = 0.0;
          if (!parse_double(raw, v)) {
            ok = false;
          } else {
            r.cells[ci] = v;
          }
          break;
        }
        case ColumnType::timestamp: {
          double v = 0.0;
          if (parse_double(raw, v)) {
            r.cells[ci] = v;
          } else {
            r.cells[ci] = raw;  // datetime text is carried, never vectorized
          }
          break;
        }
        case ColumnType::categorical:
          r.cells[ci] = raw;
          break;
        case ColumnType::label: {
          std::string lower = lowercase(raw);
          if (schema.benign_labels.count(lower)) {
            r.label = 0;
          } else if (schema.positive_labels.count(lower)) {
            r.label = 1;
            if (!generic_positive(lower)) r.sublabel = raw;
          } else {
            ok = false;  // unrecognized label value
          }
          r.cells[ci] = raw;
          break;
        }
      }
    }
    if (!ok) {
      ++rep.rows_skipped;
      continue;
    }
    ++rep.rows_ok;
    records.push_back(std::move(r));
  }
  if (data_rows > 0 && records.empty()) {
    fail(Errc::all_rows_malformed,
         "all " + std::to_string(data_rows) + " data rows were malformed");
  }
  return records;
}

std::vector<Record> ingest_csv(const Schema& schema, const std::string& path,
                               IngestReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, path);
  return ingest_csv_stream(schema, in, report);
}

std::string to_csv(const Schema& schema, const std::vector<Record>& records) {
  std::ostringstream out;
  for (size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) out << ',';
    out << schema.columns[i].name;
  }
  out << '\n';
  for (const auto& r : records) {
    for (size_t i = 0; i < schema.columns.size(); ++i) {
      if (i) out << ',';
      if (i < r.cells.size()) out << csv_escape(cell_text(r.cells[i]));
    }
    out << '\n';
  }
  return out.str();
}

void export_csv(const Schema& schema, const std::vector<Record>& records,
                const std::string& path) {
  write_file(path, to_csv(schema, records));
}

// ---------------------------------------------------------------------------
// Preprocessor

Preprocessor Preprocessor::fit(const Schema& schema, const std::vector<Record>& train) {
  if (train.empty()) fail(Errc::empty_training_set, "cannot fit preprocessor on empty set");
  Preprocessor pp;
  pp.fitted_ = true;
  pp.schema_name_ = schema.name;
  pp.feature_cols_ = schema.feature_indices();
  for (size_t ci : pp.feature_cols_) {
    const Column& col = schema.columns[ci];
    if (col.type == ColumnType::numeric) {
      NumericStats st;
      bool first = true;
      for (const auto& r : train) {
        double v = cell_number(r.cells.at(ci));
        if (first) {
          st.min = st.max = v;
          first = false;
        } else {
          st.min = std::min(st.min, v);
          st.max = std::max(st.max, v);
        }
      }
      pp.numeric_[ci] = st;
    } else {
      std::map<std::string, uint32_t>& dict = pp.dictionaries_[ci];
      uint32_t next = 1;  // 0 reserved for unseen
      for (const auto& r : train) {
        std::string key = cell_text(r.cells.at(ci));
        if (dict.emplace(key, next).second) ++next;
      }
    }
  }
  return pp;
}

void Preprocessor::require_fitted() const {
  if (!fitted_) fail(Errc::unfitted_preprocessor, "preprocessor has not been fitted");
}

size_t Preprocessor::dimension() const {
  require_fitted();
  return feature_cols_.size();
}

Eigen::VectorXd Preprocessor::transform(const Record& r) const {
  require_fitted();
  Eigen::VectorXd out(static_cast<Eigen::Index>(feature_cols_.size()));
  for (size_t k = 0; k < feature_cols_.size(); ++k) {
    size_t ci = feature_cols_[k];
    double x = 0.0;
    auto num = numeric_.find(ci);
    if (num != numeric_.end()) {
      double v = cell_number(r.cells.at(ci));
      double span = num->second.max - num->second.min;
      x = span > 0.0 ? (v - num->second.min) / span : 0.0;
    } else {
      const auto& dict = dictionaries_.at(ci);
      double code = 0.0;
      const Cell& cell = r.cells.at(ci);
      if (const double* pre_encoded = std::get_if<double>(&cell)) {
        code = std::clamp(std::round(*pre_encoded), 0.0, static_cast<double>(dict.size()));
      } else {
        auto it = dict.find(std::get<std::string>(cell));
        code = it != dict.end() ? static_cast<double>(it->second) : 0.0;
      }
      x = dict.empty() ? 0.0 : code / static_cast<double>(dict.size());
    }
    out[static_cast<Eigen::Index>(k)] = std::clamp(x, 0.0, 1.0);
  }
  return out;
}

FeatureVector Preprocessor::transform_vector(const Record& r) const {
  return FeatureVector{transform(r), r.label, r.id};
}

std::vector<FeatureVector> Preprocessor::transform_all(const std::vector<Record>& rs) const {
  std::vector<FeatureVector> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(transform_vector(r));
  return out;
}

double Preprocessor::categorical_code(const std::string& column, const std::string& value) const {
  require_fitted();
  const Schema& schema = schema_by_name(schema_name_);
  auto idx = schema.column_index(column);
  if (!idx) fail(Errc::schema_mismatch, "no such column: " + column);
  auto dict = dictionaries_.find(*idx);
  if (dict == dictionaries_.end()) fail(Errc::schema_mismatch, column + " is not categorical");
  auto it = dict->second.find(value);
  return it != dict->second.end() ? static_cast<double>(it->second) : 0.0;
}

std::string Preprocessor::to_json_text() const {
  require_fitted();
  json j;
  j["schema"] = schema_name_;
  json numeric = json::object();
  for (const auto& [ci, st] : numeric_) {
    numeric[std::to_string(ci)] = {format_double(st.min), format_double(st.max)};
  }
  j["numeric"] = std::move(numeric);
  json dicts = json::object();
  for (const auto& [ci, dict] : dictionaries_) {
    json d = json::object();
    for (const auto& [value, code] : dict) d[value] = code;
    dicts[std::to_string(ci)] = std::move(d);
  }
  j["dictionaries"] = std::move(dicts);
  return j.dump();
}

Preprocessor Preprocessor::from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(Errc::corrupt_model_file, "bad preprocessor block");
  Preprocessor pp;
  try {
    pp.schema_name_ = j.at("schema").get<std::string>();
    const Schema& schema = schema_by_name(pp.schema_name_);
    pp.feature_cols_ = schema.feature_indices();
    for (const auto& [key, mm] : j.at("numeric").items()) {
      NumericStats st;
      double lo = 0.0, hi = 0.0;
      if (!parse_double(mm.at(0).get<std::string>(), lo) ||
          !parse_double(mm.at(1).get<std::string>(), hi)) {
        fail(Errc::corrupt_model_file, "bad numeric stats");
      }
      st.min = lo;
      st.max = hi;
      pp.numeric_[std::stoul(key)] = st;
    }
    for (const auto& [key, d] : j.at("dictionaries").items()) {
      std::map<std::string, uint32_t>& dict = pp.dictionaries_[std::stoul(key)];
      for (const auto& [value, code] : d.items()) dict[value] = code.get<uint32_t>();
    }
  } catch (const json::exception& e) {
    fail(Errc::corrupt_model_file, std::string("bad preprocessor block: ") + e.what());
  }
  pp.fitted_ = true;
  return pp;
}

std::string Preprocessor::fingerprint() const {
  require_fitted();
  uint64_t h = fnv1a64(schema_name_);
  h = fnv1a64(to_json_text(), h);
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Split

SplitResult split_records(const std::vector<Record>& records, double ratio, uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) fail(Errc::degenerate_split, "ratio must be in (0,1)");
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < records.size(); ++i) by_class[records[i].label].push_back(i);
  if (by_class.empty()) fail(Errc::degenerate_split, "no records to split");

  SplitResult out;
  Rng rng(seed);
  for (auto& [cls, idx] : by_class) {
    Rng class_rng = rng.split(static_cast<uint64_t>(cls) + 17);
    class_rng.shuffle(idx);
    auto train_n = static_cast<size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    if (train_n == 0 || train_n == idx.size()) {
      fail(Errc::degenerate_split, "class " + std::to_string(cls) + " with " +
                                       std::to_string(idx.size()) +
                                       " records would leave one side empty");
    }
    for (size_t k = 0; k < idx.size(); ++k) {
      (k < train_n ? out.train : out.test).push_back(records[idx[k]]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators

AnomlSample anoml_benign_sample(Rng& rng) {
  AnomlSample s;
  s.temperature = rng.normal(22.0, 1.2);
  s.humidity = rng.normal(45.0, 3.0);
  s.light = rng.normal(300.0, 40.0);
  s.loudness = rng.normal(40.0, 5.0);
  return s;
}

// air-dryer excursion: hot, dry, noisy, light mildly disturbed
AnomlSample anoml_anomalous_sample(Rng& rng) {
  AnomlSample s;
  s.temperature = rng.normal(52.0, 4.0);
  s.humidity = rng.normal(12.0, 3.0);
  s.light = rng.normal(320.0, 50.0);
  s.loudness = rng.normal(72.0, 6.0);
  return s;
}

namespace {

double clamped_normal(Rng& rng, double mean, double sd, double lo) {
  return std::max(lo, rng.normal(mean, sd));
}

void set_flow(std::map<std::string, double>& m, Rng& rng, double dur_mean, double fwd_mean,
              double bwd_mean, double len_mean, double byts_mean, double pkts_mean,
              double iat_mean, double syn_mean, double ack_mean, double rst_mean) {
  m["flow_duration"] = clamped_normal(rng, dur_mean, dur_mean * 0.25, 1.0);
  m["tot_fwd_pkts"] = clamped_normal(rng, fwd_mean, fwd_mean * 0.25, 1.0);
  m["tot_bwd_pkts"] = clamped_normal(rng, bwd_mean, std::max(1.0, bwd_mean * 0.25), 0.0);
  double len = clamped_normal(rng, len_mean, len_mean * 0.2, 8.0);
  m["fwd_pkt_len_mean"] = len;
  m["fwd_pkt_len_max"] = len * rng.uniform(1.2, 1.8);
  m["fwd_pkt_len_min"] = len * rng.uniform(0.2, 0.6);
  double blen = clamped_normal(rng, len_mean * 0.8, len_mean * 0.2, 8.0);
  m["bwd_pkt_len_mean"] = blen;
  m["bwd_pkt_len_max"] = blen * rng.uniform(1.2, 1.8);
  m["bwd_pkt_len_min"] = blen * rng.uniform(0.2, 0.6);
  m["totlen_fwd_pkts"] = m["tot_fwd_pkts"] * len;
  m["totlen_bwd_pkts"] = m["tot_bwd_pkts"] * blen;
  m["flow_byts_per_s"] = clamped_normal(rng, byts_mean, byts_mean * 0.2, 1.0);
  m["flow_pkts_per_s"] = clamped_normal(rng, pkts_mean, pkts_mean * 0.2, 0.5);
  double iat = clamped_normal(rng, iat_mean, iat_mean * 0.3, 0.01);
  m["flow_iat_mean"] = iat;
  m["flow_iat_std"] = iat * rng.uniform(0.1, 0.5);
  m["flow_iat_max"] = iat * rng.uniform(2.0, 5.0);
  m["flow_iat_min"] = iat * rng.uniform(0.05, 0.3);
  m["syn_flag_cnt"] = clamped_normal(rng, syn_mean, std::max(0.5, syn_mean * 0.2), 0.0);
  m["ack_flag_cnt"] = clamped_normal(rng, ack_mean, std::max(0.5, ack_mean * 0.2), 0.0);
  m["rst_flag_cnt"] = clamped_normal(rng, rst_mean, std::max(0.3, rst_mean * 0.2), 0.0);
}

}  // namespace

std::map<std::string, double> iotid20_benign_flow(Rng& rng) {
  std::map<std::string, double> m;
  set_flow(m, rng, /*dur*/ 8000.0, /*fwd*/ 14.0, /*bwd*/ 12.0, /*len*/ 420.0,
           /*byts*/ 2200.0, /*pkts*/ 18.0, /*iat*/ 220.0, /*syn*/ 1.0, /*ack*/ 11.0,
           /*rst*/ 0.2);
  return m;
}

std::map<std::string, double> iotid20_attack_flow(Rng& rng, const std::string& sublabel) {
  std::map<std::string, double> m;
  if (sublabel == "Scan") {
    set_flow(m, rng, 900.0, 70.0, 4.0, 60.0, 16000.0, 320.0, 4.0, 42.0, 6.0, 22.0);
  } else if (sublabel == "DoS") {
    set_flow(m, rng, 4000.0, 850.0, 20.0, 320.0, 880000.0, 2800.0, 0.5, 160.0, 30.0, 6.0);
  } else if (sublabel == "Mirai") {
    set_flow(m, rng, 6000.0, 420.0, 10.0, 180.0, 380000.0, 1400.0, 1.2, 90.0, 14.0, 3.0);
  } else {  // MITM ARP spoofing
    set_flow(m, rng, 9000.0, 120.0, 110.0, 140.0, 52000.0, 260.0, 9.0, 24.0, 96.0, 2.0);
  }
  return m;
}

namespace {

Record make_anoml_record(const Schema& schema, Rng& rng, int64_t ts, int label) {
  AnomlSample s = label ? anoml_anomalous_sample(rng) : anoml_benign_sample(rng);
  Record r;
  r.schema = schema.name;
  r.label = label;
  r.cells = {Cell{static_cast<double>(ts)}, Cell{s.temperature}, Cell{s.humidity},
             Cell{s.light},                Cell{s.loudness},
             Cell{std::string(label ? "Anomalous" : "Normal")}};
  return r;
}

Record make_ds2os_record(const Schema& schema, Rng& rng, int64_t ts, int label) {
  static const char* kServiceTypes[] = {"thermostat", "lightController", "doorLock",
                                        "washingService", "batteryService", "smokeDetector"};
  static const char* kLocations[] = {"kitchen", "bedroom", "entrance", "garage", "corridor"};
  static const char* kBenignOps[] = {"read", "write"};
  struct AttackProfile {
    const char* sublabel;
    const char* operation;
  };
  static const AttackProfile kAttacks[] = {
      {"probing", "probe"},          {"dos", "flood"},
      {"malicious_control", "forcedWrite"}, {"malicious_operation", "rogueCall"},
      {"scan", "portScan"},          {"spying", "snoop"},
      {"wrong_setup", "misconfig"}};

  const char* src_type = kServiceTypes[rng.index(std::size(kServiceTypes))];
  const char* dst_type = kServiceTypes[rng.index(std::size(kServiceTypes))];
  const char* src_loc = kLocations[rng.index(std::size(kLocations))];
  const char* dst_loc = kLocations[rng.index(std::size(kLocations))];
  int src_no = static_cast<int>(rng.index(4)) + 1;
  int dst_no = static_cast<int>(rng.index(4)) + 1;

  Record r;
  r.schema = schema.name;
  r.label = label;
  std::string op;
  double value = 0.0;
  if (label) {
    const AttackProfile& a = kAttacks[rng.index(std::size(kAttacks))];
    r.sublabel = a.sublabel;
    op = a.operation;
    value = clamped_normal(rng, 165.0, 22.0, 120.0);
  } else {
    op = kBenignOps[rng.index(std::size(kBenignOps))];
    value = clamped_normal(rng, 30.0, 10.0, 0.0);
  }
  std::string src_id = std::string(src_type) + std::to_string(src_no);
  std::string dst_addr = "site" + std::to_string(dst_no) + "/" + dst_type;
  r.cells = {Cell{static_cast<double>(ts)},
             Cell{src_id},
             Cell{"site" + std::to_string(src_no) + "/" + src_type},
             Cell{std::string(src_type)},
             Cell{std::string(src_loc)},
             Cell{dst_addr},
             Cell{std::string(dst_type)},
             Cell{std::string(dst_loc)},
             Cell{dst_addr + "/node"},
             Cell{std::string(dst_type)},
             Cell{op},
             Cell{value},
             Cell{std::string(label ? r.sublabel : "normal")}};
  return r;
}

Record make_iotid20_record(const Schema& schema, Rng& rng, int64_t ts, int label) {
  static const char* kSublabels[] = {"Mirai", "DoS", "Scan", "MITM_ARP_Spoofing"};
  Record r;
  r.schema = schema.name;
  r.label = label;
  std::map<std::string, double> flow;
  if (label) {
    r.sublabel = kSublabels[rng.index(std::size(kSublabels))];
    flow = iotid20_attack_flow(rng, r.sublabel);
  } else {
    flow = iotid20_benign_flow(rng);
  }
  r.cells.resize(schema.columns.size());
  r.cells[0] = static_cast<double>(ts);
  for (size_t i = 1; i + 1 < schema.columns.size(); ++i) {
    r.cells[i] = flow.at(schema.columns[i].name);
  }
  r.cells[schema.columns.size() - 1] = std::string(label ? r.sublabel : "Normal");
  return r;
}

}  // namespace

std::vector<Record> generate_synthetic(const std::string& scenario, size_t n, double anomaly_rate,
                                       uint64_t seed) {
  if (!(anomaly_rate >= 0.0 && anomaly_rate <= 1.0)) {
    fail(Errc::invalid_rate, "anomaly_rate must be in [0,1]");
  }
  if (n < 1) fail(Errc::invalid_rate, "n must be >= 1");
  const Schema& schema = schema_by_name(scenario);

  auto positives = static_cast<size_t>(std::llround(anomaly_rate * static_cast<double>(n)));
  std::vector<int> labels(n, 0);
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  Rng placement = rng.split(1);
  placement.shuffle(order);
  for (size_t k = 0; k < positives; ++k) labels[order[k]] = 1;

  Rng values = rng.split(2);
  std::vector<Record> out;
  out.reserve(n);
  const int64_t base_ts = 1600000000000;  // fixed epoch keeps exports reproducible
  for (size_t i = 0; i < n; ++i) {
    int64_t ts = base_ts + static_cast<int64_t>(i) * 1000;
    Record r;
    if (schema.name == "anoml_iot") {
      r = make_anoml_record(schema, values, ts, labels[i]);
    } else if (schema.name == "ds2os") {
      r = make_ds2os_record(schema, values, ts, labels[i]);
    } else {
      r = make_iotid20_record(schema, values, ts, labels[i]);
    }
    r.id = static_cast<int64_t>(i) + 1;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dtwin
