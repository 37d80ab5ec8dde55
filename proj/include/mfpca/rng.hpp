#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mfpca {

// splitmix64 step; used only to derive independent stream seeds, never to
// produce variates directly.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic substream seed for (seed, a, b). Streams for distinct
// (a, b) pairs are decorrelated by three splitmix64 mixing rounds, so
// replicates and sources can be simulated in any order (or in parallel)
// with identical output.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (a + 0x9E3779B97F4A7C15ull);
  h = splitmix64(s);
  s = h ^ (b + 0xC2B2AE3D27D4EB4Full);
  return splitmix64(s);
}

// Wrapper around mt19937_64 with hand-pinned uniform and normal
// transformations. std::normal_distribution is not pinned by the standard,
// so we avoid it: byte-identical output across platforms and thread counts
// is part of the simulation contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return Rng(derive_seed(seed, a, b));
  }

  // Uniform on [0, 1): top 53 bits of the engine output.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller, cosine branch only. Consumes exactly
  // two engine outputs per variate; u1 is shifted into (0, 1] so the log
  // is always finite.
  double normal() {
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n), rejection-free modulo is fine here: n is
  // always tiny relative to 2^64 so the bias is far below 2^-50.
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mfpca
