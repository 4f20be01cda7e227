#pragma once

#include <cstdint>
#include <string_view>

namespace ecgdnn {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Stable sub-seed for a named purpose, e.g. derive_seed(seed, "shuffle").
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return mix64(seed ^ mix64(h));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 0x632BE59BD9B4E019ull));
}

/// Uniform integer in [0, bound) by rejection from 64-bit draws; unlike
/// std::uniform_int_distribution the sequence is the same on every platform.
template <typename Urbg>
std::uint64_t uniform_index(Urbg& rng, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound + 1) % bound;
  std::uint64_t draw;
  do {
    draw = static_cast<std::uint64_t>(rng());
  } while (draw > limit);
  return draw % bound;
}

}  // namespace ecgdnn
