#pragma once

#include <cstdint>
#include <numbers>
#include <random>

namespace tomolab {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Combines a parent seed with a child index into a new seed.
///
/// Seeds for experiment cells and repetitions are derived as
///   cell_seed = derive_seed(master_seed, cell_index)
///   rep_seed  = derive_seed(cell_seed, rep_index)
/// Each level is an injective function of the index for a fixed parent, so
/// distinct (cell, rep) pairs under one master seed get distinct streams with
/// overwhelming probability.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Random stream used throughout: a 64-bit Mersenne twister plus
/// implementation-independent conversions to doubles.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    for (;;) {
      double v = lo + (hi - lo) * uniform();
      if (v < hi) return v;
    }
  }

  /// Uniform phase on [0, pi).
  double phase() { return uniform(0.0, std::numbers::pi); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tomolab
