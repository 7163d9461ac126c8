#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace fedleak {

enum class ErrorKind {
  invalid_input,
  configuration,
  ingestion,
  capacity,
  io,
  aggregation,
  forensics,
  mdm,
  training_diverged,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

// SplitMix64, the usual seed-stretching finalizer.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// All stochastic paths derive their generator from (seed, purpose, indices...)
// so any round/client/step can be replayed without carrying RNG state.
inline uint64_t derive_seed(uint64_t seed, std::string_view purpose) {
  return splitmix64(seed ^ fnv1a64(purpose));
}

inline uint64_t derive_seed(uint64_t seed, std::string_view purpose, uint64_t a) {
  return splitmix64(derive_seed(seed, purpose) ^ splitmix64(a ^ 0x51ed2701ab0517c5ULL));
}

inline uint64_t derive_seed(uint64_t seed, std::string_view purpose, uint64_t a, uint64_t b) {
  return splitmix64(derive_seed(seed, purpose, a) ^ splitmix64(b ^ 0xd6e8feb86659fd93ULL));
}

inline std::mt19937_64 make_rng(uint64_t derived_seed) { return std::mt19937_64(derived_seed); }

// Deterministic work splitter. Results are written by index, so the outcome
// does not depend on the number of workers.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn, size_t max_threads = 0) {
  size_t hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (max_threads > 0 && max_threads < hw) hw = max_threads;
  size_t workers = std::min(hw, n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string hex64(uint64_t v);

}  // namespace fedleak
