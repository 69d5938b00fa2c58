#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace smelab {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the stream at (master, counters...). Any stream can be
/// regenerated in isolation from its key.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> counters) {
  return Rng(derive_seed(master, counters));
}

}  // namespace smelab
