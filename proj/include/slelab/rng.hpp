#pragma once

#include <cstdint>
#include <random>

namespace slelab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for sample `index` of a run seeded with `seed`.
inline std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index,
                                     std::uint64_t stream = 0) {
  const std::uint64_t k = splitmix64(splitmix64(seed) ^ splitmix64(index * 2 + 1) ^
                                     splitmix64(~stream));
  std::seed_seq seq{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace slelab
