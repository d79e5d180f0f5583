#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flowact {

// Error taxonomy shared by every module. The CLI maps kinds to exit codes.
enum class ErrorKind {
  invalid_argument,  // bad call / bad value
  data_error,        // corrupt or inconsistent data (NaN payloads, oov words)
  config_error,      // rejected configuration
  numeric_error,     // non-finite values produced where finite required
  format_error,      // unreadable persisted artifact
  protocol_error,    // env wire protocol violation
  transport_error,   // socket-level failure (timeout, disconnect)
  planning_failure,  // planner could not reach a sampled goal
  insufficient_data, // not enough samples for a fit
  io_error,          // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::data_error: return "data-error";
    case ErrorKind::config_error: return "config-error";
    case ErrorKind::numeric_error: return "numeric-error";
    case ErrorKind::format_error: return "format-error";
    case ErrorKind::protocol_error: return "protocol-error";
    case ErrorKind::transport_error: return "transport-error";
    case ErrorKind::planning_failure: return "planning-failure";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

// FNV-1a 64-bit, used for config hashes and counter-based seed derivation.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic sub-seed for a (seed, purpose, index) triple. Every stochastic
// consumer derives its own stream this way, which makes checkpoint resume a
// pure function of (master seed, step counters).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = fnv1a64(purpose);
  h = splitmix64(h ^ splitmix64(master));
  h = splitmix64(h ^ splitmix64(a * 0x9e3779b97f4a7c15ull + 1));
  h = splitmix64(h ^ splitmix64(b * 0xd1b54a32d192ed03ull + 2));
  return h;
}

// Round a double to the nearest float value, kept in double storage.
// Parameters and environment state live on the f32 grid so that the 32-bit
// checkpoint and wire formats are lossless.
inline double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace flowact
