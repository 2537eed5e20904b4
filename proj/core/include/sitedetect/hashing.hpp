#pragma once

#include <cstdint>
#include <string_view>

namespace sitedetect {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over the bytes, seeded, with a splitmix finalizer. Stable across
// platforms and releases; shingle signatures and stub scores depend on it.
inline constexpr std::uint64_t hash64(std::string_view bytes, std::uint64_t seed = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

// Uniform integer in [0, bound) by rejection; bound must be > 0.
template <typename Rng>
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace sitedetect
