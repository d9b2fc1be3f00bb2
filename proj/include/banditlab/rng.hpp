#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace banditlab {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stable FNV-1a over bytes; std::hash is not stable across builds.
constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

// Normalizes -0.0 so equal sweep values hash equally.
inline std::uint64_t double_bits(double v) {
  return std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
}

}  // namespace banditlab
