#pragma once

// Deterministic RNG plumbing. Every stochastic routine takes an explicit
// 64-bit seed; worker streams are derived from a master seed and the
// trajectory index through splitmix64, so results do not depend on how
// trajectories are scheduled across threads.

#include <cmath>
#include <cstdint>
#include <random>

namespace micromaser {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream seed for worker/trajectory `index` under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

// mt19937_64 has a standardized output sequence; transforms below are
// written out explicitly so samples are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform strictly inside (0, 1): logs are safe and exponential gaps are
  // never zero, so sampled arrival times are strictly increasing.
  double uniform() {
    const std::uint64_t bits = gen_() >> 11;  // top 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Index in [0, n) with probability weights[i] / sum(weights).
  int categorical(const double* weights, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += weights[i];
    double u = uniform() * total;
    for (int i = 0; i < n; ++i) {
      u -= weights[i];
      if (u <= 0.0) return i;
    }
    return n - 1;  // guard against roundoff
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace micromaser
