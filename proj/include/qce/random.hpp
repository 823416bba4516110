#pragma once

// Counter-based uniforms: the value depends only on (seed, counter, lane), so
// parallel loops draw the same numbers regardless of scheduling.

#include <cstdint>

namespace qce {

inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(std::uint64_t seed, std::uint64_t counter, std::uint64_t lane = 0) {
  const std::uint64_t h = mix64(mix64(seed) ^ mix64(counter * 0x100000001B3ULL + lane));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace qce
