#pragma once

/*
 * Deterministic pseudo-random number generation.
 *
 * All randomness in the library flows through this engine so that a seed
 * pins every generated model, rollout, and perturbation bit-for-bit across
 * platforms.  The standard <random> distributions are implementation-defined,
 * which would silently break golden-file tests, so sampling helpers are
 * implemented here from first principles on top of xoshiro256**, seeded by
 * splitmix64 as its authors recommend.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cmdplab {

/* splitmix64: used only to expand a 64-bit seed into engine state. */
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  /* xoshiro256** next(): full-period 64-bit output. */
  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /* Uniform double in [0, 1): top 53 bits scaled by 2^-53. */
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /* Uniform double in [lo, hi). */
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /*
   * Sample an index from an unnormalized nonnegative weight row by CDF scan.
   * The total is computed here so callers may pass raw weights; numerical
   * leftovers fall onto the last positive-weight index.
   */
  std::size_t categorical(const double* w, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(w[i] >= 0.0)) throw std::invalid_argument("categorical: negative or NaN weight");
      total += w[i];
    }
    if (!(total > 0.0)) throw std::invalid_argument("categorical: zero total weight");
    double u = uniform01() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] > 0.0) last_positive = i;
      acc += w[i];
      if (u < acc) return i;
    }
    return last_positive;
  }

  std::size_t categorical(const std::vector<double>& w) { return categorical(w.data(), w.size()); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace cmdplab
