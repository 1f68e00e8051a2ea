#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace plateid {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives the seed of a labelled stream from a parent seed:
///   seed(label, index) = mix64(mix64(parent) ^ fnv1a(label) ^ mix64(index + 1))
/// Every random consumer in the pipeline owns one label ("noise",
/// "denoise", "segment", "subsample", "chain" + index, ...).
constexpr std::uint64_t stream_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(parent) ^ h ^ mix64(index + 1));
}

inline Rng make_rng(std::uint64_t parent, std::string_view label,
                    std::uint64_t index = 0) {
  return Rng(stream_seed(parent, label, index));
}

}  // namespace plateid
