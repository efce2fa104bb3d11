#pragma once

// Deterministic randomness helpers. Distributions are hand-rolled from raw
// engine output so sequences do not depend on standard-library internals.

#include <cstdint>
#include <random>

namespace did {

inline double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// bounded integer via rejection-free scaling (bias negligible for small n)
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent engine for (seed, step, stream). Training code derives all of
// its per-step randomness this way, so resuming from a checkpoint replays the
// exact sequence without serializing engine state.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t step, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ 0x6a09e667f3bcc908ULL) ^
                                    splitmix64(step * 0x100000001b3ULL + stream)));
}

}  // namespace did
