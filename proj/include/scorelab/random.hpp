#pragma once

#include <cstdint>
#include <random>

namespace scorelab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of task `index` under master seed `master`. Each task's seed depends
/// only on (master, index), so adding tasks never perturbs existing ones.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Seed keyed by a real-valued parameter (e.g. a noise level), using its bit pattern.
std::uint64_t derive_seed(std::uint64_t master, double key);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace scorelab
