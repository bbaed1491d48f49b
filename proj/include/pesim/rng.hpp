#pragma once

#include <cstdint>

namespace pesim {

/// Independent per-purpose streams derived from one episode seed.
enum class SeedStream : std::uint64_t { Spawn = 1, LidarNoise = 2, Policy = 3 };

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream, std::uint64_t salt = 0) {
  return mix64(mix64(seed ^ (static_cast<std::uint64_t>(stream) << 56)) + salt);
}

}  // namespace pesim
