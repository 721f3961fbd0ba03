#pragma once

// Deterministic PRNG streams. All randomness in the library flows through
// splitmix64 so runs are reproducible bit-for-bit across platforms; std::
// distributions are avoided because their output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <limits>

namespace engram_ledger {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Splitmix64 as a stream generator. Tiny state, decent statistics, and the
// seeding rule the simulator depends on (per-node stream = splitmix64 of
// global seed XOR node id) falls out naturally.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<std::uint64_t>::max();
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t operator()() { return next_u64(); }

  // Uniform draw in [0, n) by rejection; no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {  // inclusive ends
    return lo + below(hi - lo + 1);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one value per call, cache discarded for statelessness.
  double gaussian(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * mag * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

inline Rng node_stream(std::uint64_t global_seed, std::uint64_t node_id) {
  return Rng(splitmix64(global_seed ^ node_id));
}

}  // namespace engram_ledger
