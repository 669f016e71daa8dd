#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace fewshot {

/// SplitMix64 step function (public-domain constants from Steele/Lea/Flood).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for episode `index` under the run seed `seed`. Pure function of
/// its two arguments, so any episode can be regenerated in isolation.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index));
}

/// Unbiased draw from [0, n). Rejection sampling on the raw 64-bit output so
/// results do not depend on the standard library's unspecified
/// uniform_int_distribution algorithm.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
  const std::uint64_t rem = (0 - n) % n;  // 2^64 mod n
  std::uint64_t x = gen();
  if (rem != 0) {
    const std::uint64_t cutoff = 0 - rem;  // largest multiple of n
    while (x >= cutoff) x = gen();
  }
  return x % n;
}

/// First k entries of a uniform permutation of {0..n-1} (partial
/// Fisher-Yates). Requires k <= n.
inline std::vector<std::size_t> sample_without_replacement(std::mt19937_64& gen,
                                                           std::size_t n,
                                                           std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(gen, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace fewshot
