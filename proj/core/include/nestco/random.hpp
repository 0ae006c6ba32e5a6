#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace nestco {

/// The one generator used everywhere. mt19937_64 output is fully specified by
/// the standard, so seeded streams are reproducible.
using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) built from the top 53 bits of one generator call.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by multiply-shift. n == 1 consumes no randomness.
__extension__ typedef unsigned __int128 uint128_t;

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n <= 1) return 0;
  return static_cast<std::size_t>((static_cast<uint128_t>(rng()) * n) >> 64);
}

/// Fisher-Yates shuffle driven by uniform_index, identical on every platform.
template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

/// Standard normal draw (Box-Muller, one variate per call).
double standard_normal(Rng& rng);

/// Derives an independent stream seed from a base seed and a stream tag
/// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace nestco
