#pragma once

#include <cstdint>
#include <random>

namespace sotglp {

// splitmix64 step; used to derive independent stream seeds from a base seed
// so that adding a consumer somewhere does not shift every other stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return splitmix64(splitmix64(base) ^ tag);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t tag = 0) {
  return std::mt19937_64(derive_seed(seed, tag));
}

}  // namespace sotglp
