#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace ffcnet {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over the bytes of `s`. Also the source-id hash of the spectral cache.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a base seed, a stream name and a
/// list of indices (sample, epoch, ...). Streams with different names or
/// indices do not depend on each other's consumption.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t h = mix64(base ^ fnv1a64(stream));
  for (std::uint64_t i : indices) h = mix64(h ^ mix64(i));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::string_view stream,
                    std::initializer_list<std::uint64_t> indices = {}) {
  return Rng(derive_seed(base, stream, indices));
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by Lemire's multiply-shift (bias < n / 2^64).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

}  // namespace ffcnet
