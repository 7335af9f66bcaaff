#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dtwin {

// Error codes shared across the platform. Every thrown dtwin::Error carries
// one of these so callers can branch on the failure kind instead of parsing
// message text.
enum class Errc {
  // twin configuration / registry
  malformed_config,
  missing_section,
  duplicate_feature,
  duplicate_twin,
  unknown_twin,
  unknown_feature,
  quarantined_twin,
  // wire protocol
  unserializable_value,
  malformed_message,
  unsupported_version,
  unknown_kind,
  bind_failure,
  connect_failure,
  device_unreachable,
  // ml
  empty_training_set,
  empty_test_set,
  dimension_mismatch,
  non_finite_loss,
  corrupt_model_file,
  schema_mismatch,
  // data pipeline
  missing_file,
  header_mismatch,
  all_rows_malformed,
  unfitted_preprocessor,
  degenerate_split,
  invalid_rate,
  // services
  no_served_model,
  no_verdicts,
  store_unavailable,
  storage_failure,
  insufficient_data,
  fog_unreachable,
  stack_unavailable,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

// Deterministic random source. All stochastic code in the project draws from
// this wrapper instead of std:: distributions, whose output is
// implementation-defined; the sequences here depend only on the seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed), seed_(seed) {}

  uint64_t u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  size_t index(size_t n) { return static_cast<size_t>(eng_() % n); }

  double normal(double mean = 0.0, double stddev = 1.0);

  // deterministic in-place Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // Independent child stream; used to give each subtask (tree, node, ...) its
  // own generator so results do not depend on evaluation order.
  Rng split(uint64_t stream) const;

  uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 eng_;
  uint64_t seed_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

uint64_t splitmix64(uint64_t x);

uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 1469598103934665603ull);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);  // throws Errc::malformed_message

// wall-clock ms since epoch (timestamps on wire and in records)
int64_t now_ms();
// monotonic microseconds (latency measurement only)
int64_t steady_us();

std::string read_file(const std::string& path);           // throws Errc::missing_file
void write_file(const std::string& path, std::string_view bytes);

}  // namespace dtwin
