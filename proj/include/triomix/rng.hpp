#pragma once

#include <cstdint>
#include <random>

namespace triomix {

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent seed streams from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for task `stream` under master seed `seed`. Distinct streams for
// restarts, replicates, subsets and bootstrap reps all come from here.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
}

}  // namespace triomix
