#pragma once

#include <cstdint>

namespace lrareg {

/// Named sub-streams hanging off one user seed.
enum class Stream : std::uint64_t {
  Optimizer = 1,
  TestPose = 2,
  InitialOffset = 3,
  Phantom = 4,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `stream`, item `index` (e.g. benchmark case).
constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

}  // namespace lrareg
