#pragma once

// Deterministic counter-based PRNG.
//
// The generator is SplitMix64: a 64-bit counter advanced by the golden-gamma
// constant, finalized by two xor-shift multiplies. The exact constants below
// are the contract; the stream for a given seed is identical on every
// platform, which keeps frozen test vectors portable. Floating draws use the
// top 53 bits; normal draws use Box-Muller on two uniform draws.

#include <cmath>
#include <cstdint>

namespace parmri {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Unbiased by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  /// Standard normal via Box-Muller; consumes exactly two uniform draws.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  /// Independent substream: mixes the index into the current state without
  /// consuming draws from this stream.
  Rng substream(std::uint64_t index) const {
    Rng r(state_ ^ (0xd1342543de82ef95ULL * (index + 1)));
    return r;
  }

private:
  std::uint64_t state_;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace parmri
