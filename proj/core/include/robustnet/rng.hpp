#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace robustnet {

/// Mixer used to derive independent child seeds from (seed, index) pairs.
/// Keeps per-sample streams reproducible regardless of evaluation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seeded generator with hand-rolled distributions. std:: distribution
/// objects are implementation-defined, so sampling goes through explicit
/// formulas to make results identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Derives a child generator for stream `index`.
  Rng fork(std::uint64_t index) const {
    return Rng(splitmix64(seed_ ^ splitmix64(index + 1)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection keeps the draw exactly uniform for any n.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller. One value per call, no caching, so the
  /// stream position is a pure function of the call count.
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Exponential with rate 1.
  double exponential() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(u);
  }

  /// Sign drawn uniformly from {-1, +1}.
  double sign() { return (engine_() & 1ull) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace robustnet
