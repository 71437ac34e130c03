#pragma once

#include <cstdint>
#include <random>

namespace dtdml {

// Derives an independent stream seed from a base seed and a stream tag, so
// that sub-tasks (per-source training, per-repeat subsets, ...) draw from
// decorrelated generators while staying fully reproducible.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace dtdml
