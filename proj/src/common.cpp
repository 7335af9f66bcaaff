#include "dtwin/common.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dtwin {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_config: return "MalformedConfig";
    case Errc::missing_section: return "MissingSection";
    case Errc::duplicate_feature: return "DuplicateFeature";
    case Errc::duplicate_twin: return "DuplicateTwin";
    case Errc::unknown_twin: return "UnknownTwin";
    case Errc::unknown_feature: return "UnknownFeature";
    case Errc::quarantined_twin: return "QuarantinedTwin";
    case Errc::unserializable_value: return "UnserializableValue";
    case Errc::malformed_message: return "MalformedMessage";
    case Errc::unsupported_version: return "UnsupportedVersion";
    case Errc::unknown_kind: return "UnknownKind";
    case Errc::bind_failure: return "BindFailure";
    case Errc::connect_failure: return "ConnectFailure";
    case Errc::device_unreachable: return "DeviceUnreachable";
    case Errc::empty_training_set: return "EmptyTrainingSet";
    case Errc::empty_test_set: return "EmptyTestSet";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::corrupt_model_file: return "CorruptModelFile";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::missing_file: return "MissingFile";
    case Errc::header_mismatch: return "HeaderMismatch";
    case Errc::all_rows_malformed: return "AllRowsMalformed";
    case Errc::unfitted_preprocessor: return "UnfittedPreprocessor";
    case Errc::degenerate_split: return "DegenerateSplit";
    case Errc::invalid_rate: return "InvalidRate";
    case Errc::no_served_model: return "NoServedModel";
    case Errc::no_verdicts: return "NoVerdicts";
    case Errc::store_unavailable: return "StoreUnavailable";
    case Errc::storage_failure: return "StorageFailure";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::fog_unreachable: return "FogUnreachable";
    case Errc::stack_unavailable: return "StackUnavailable";
  }
  return "Error";
}

double Rng::normal(double mean, double stddev) {
  // Box-Muller with a cached spare; avoids std::normal_distribution so the
  // stream is identical across standard libraries.
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 1e-300);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

Rng Rng::split(uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x9e3779b97f4a7c15ull)));
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

namespace {

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    }
    table[i] = c;
  }
  return table;
}

}  // namespace

uint32_t crc32(const void* data, size_t len, uint32_t seed) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

uint64_t fnv1a64(std::string_view bytes, uint64_t seed) {
  uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {
constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 3 <= bytes.size()) {
    uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                 static_cast<unsigned char>(bytes[i + 2]);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
    i += 3;
  }
  size_t rem = bytes.size() - i;
  if (rem == 1) {
    uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rem == 2) {
    uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) fail(Errc::malformed_message, "base64 length not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) fail(Errc::malformed_message, "bad base64 padding");
        vals[k] = 0;
        ++pad;
      } else {
        if (pad > 0) fail(Errc::malformed_message, "bad base64 padding");
        vals[k] = value_of(c);
        if (vals[k] < 0) fail(Errc::malformed_message, "bad base64 character");
      }
    }
    uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out += static_cast<char>((v >> 16) & 0xFF);
    if (pad < 2) out += static_cast<char>((v >> 8) & 0xFF);
    if (pad < 1) out += static_cast<char>(v & 0xFF);
  }
  return out;
}

int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

int64_t steady_us() {
  using namespace std::chrono;
  return duration_cast<microseconds>(steady_clock::now().time_since_epoch()).count();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::storage_failure, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::storage_failure, "short write to " + path);
}

}  // namespace dtwin
