#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sectorcast {

/// splitmix64 step; used to derive independent seed streams from one master
/// seed so parallel and sequential runs see identical randomness.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Draw from [0, bound) without the implementation-defined behaviour of
/// std::uniform_int_distribution; results are identical on every platform.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

inline double uniform_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Portable Fisher-Yates shuffle of 0..n-1.
inline std::vector<int> shuffled_indices(int n, std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    auto j = uniform_index(rng, static_cast<std::uint64_t>(i) + 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  return idx;
}

/// k distinct values from 0..n-1 (partial Fisher-Yates), sorted ascending.
inline std::vector<int> sample_without_replacement(int n, int k,
                                                   std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    auto j = i + static_cast<int>(uniform_index(
                 rng, static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline double gaussian(std::mt19937_64& rng) {
  // Box-Muller on the portable uniform; keeps streams reproducible.
  double u1 = uniform_real(rng);
  double u2 = uniform_real(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace sectorcast
