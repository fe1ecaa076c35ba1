#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace polymean {

// Deterministic seeded PRNG (splitmix64) with hash-derived substreams.
// Substreams keyed by distinct index tuples are non-overlapping for all
// practical purposes, which is what the experiment harness relies on for
// replicate independence. All draws are explicit value semantics: no global
// state, safe to hold one instance per thread/replicate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed + kGamma)) {}

  // Derive an independent stream keyed by up to three indices. Chaining
  // stream() calls extends the key.
  Rng stream(std::uint64_t a, std::uint64_t b = 0x6b79, std::uint64_t c = 0x9d5a) const {
    Rng r(0);
    std::uint64_t s = state_;
    s = mix(s ^ mix(a + kGamma));
    s = mix(s ^ mix(b + 2 * kGamma));
    s = mix(s ^ mix(c + 3 * kGamma));
    r.state_ = s;
    return r;
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller (two fresh uniforms per draw).
  double gaussian() {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Draw an index with probability proportional to weights[i].
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr double kTwoPi = 6.28318530717958647692;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace polymean
