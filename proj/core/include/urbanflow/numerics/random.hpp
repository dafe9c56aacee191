#pragma once

#include <cstdint>
#include <random>

namespace urbanflow::numerics {

/// splitmix64 step; used to derive independent substream seeds so that
/// per-task randomness is reproducible regardless of scheduling order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for substream `index` of the stream identified by `seed`.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t substream) {
  return std::mt19937_64(substream_seed(seed, substream));
}

}  // namespace urbanflow::numerics
