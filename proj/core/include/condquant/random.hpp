#pragma once

#include <cstdint>
#include <random>

namespace condquant {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based sub-seed derivation: the seed for stream `k` of `master` is
// mix64(master + (k + 1) * golden). Streams can therefore be regenerated in
// isolation and in any order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return mix64(master + (stream + 1) * 0x9e3779b97f4a7c15ULL);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t substream) noexcept {
  return derive_seed(derive_seed(master, stream), substream);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace condquant
