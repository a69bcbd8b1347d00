// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_COMMON_HPP
#define ADVSIG_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace advsig {

using Scalar = double;

inline constexpr const char* kToolVersion = "advsig 0.1.0";

// ---------------------------------------------------------------------------
// Error taxonomy. Every failure surfaced to callers is one of these.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad build-time configuration: unknown identifiers, invalid parameter combos.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// Bad data fed to a valid configuration: labels out of range, non-finite samples.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error("data error: " + msg) {}
};

// Caller misuse of an API or CLI: missing arguments, wrong mode.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error("usage error: " + msg) {}
};

// Numeric breakdown: non-finite intermediate values where finiteness is required.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error("numeric error: " + msg) {}
};

// Malformed persisted artifact (manifest line, config file, checkpoint).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

// A required input artifact is missing on disk.
class DependencyError : public Error {
 public:
  explicit DependencyError(const std::string& msg) : Error("dependency error: " + msg) {}
};

// Metric requested on degenerate input (e.g. single-class AUC).
class UndefinedMetricError : public DataError {
 public:
  explicit UndefinedMetricError(const std::string& msg) : DataError("undefined metric: " + msg) {}
};

// ---------------------------------------------------------------------------
// Hashing. FNV-1a, used for seeds derived from strings and for checksums.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  unsigned char buf[8];
  std::memcpy(buf, &v, 8);
  return fnv1a(buf, 8, seed ^ 0x9e3779b97f4a7c15ULL);
}

inline std::uint64_t checksum(const std::vector<Scalar>& values) {
  return fnv1a(values.data(), values.size() * sizeof(Scalar));
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rng: fully specified deterministic generator (splitmix64 core) so results
// do not depend on the standard library's distribution implementations.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  Scalar uniform() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw UsageError("Rng::below(0)");
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  Scalar normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    Scalar u1 = uniform();
    Scalar u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    Scalar r = std::sqrt(-2.0 * std::log(u1));
    Scalar a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  Scalar spare_ = 0.0;
};

// Derives a child seed from a base seed and a string tag. Used everywhere a
// per-item stream is needed (per utterance, per attack, per epoch).
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) {
  return hash_combine(fnv1a(tag), base);
}

// ---------------------------------------------------------------------------
// parallel_for: runs fn(i) for i in [0, n). Deterministic as long as each
// index writes disjoint state; never nests (inner calls run serially).
// ---------------------------------------------------------------------------

namespace detail {
inline thread_local bool in_parallel_worker = false;
}

inline unsigned worker_count() {
  static unsigned n = [] {
    if (const char* env = std::getenv("ADVSIG_THREADS")) {
      long v = std::strtol(env, nullptr, 10);
      if (v >= 1) return static_cast<unsigned>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1u : hc;
  }();
  return n;
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  unsigned workers = worker_count();
  if (n == 0) return;
  if (workers <= 1 || n == 1 || detail::in_parallel_worker) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::in_parallel_worker = true;
      for (std::size_t i = w; i < n; i += workers) fn(i);
      detail::in_parallel_worker = false;
    });
  }
  for (auto& t : pool) t.join();
}

inline bool all_finite(const std::vector<Scalar>& v) {
  for (Scalar x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace advsig

#endif  // ADVSIG_COMMON_HPP
