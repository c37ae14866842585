#pragma once

#include <cstdint>
#include <random>

namespace sibp {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent per-bag streams so that
// results do not depend on how bags are scheduled across threads.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(mix_seed(seed, stream)); }

// Salts separating the different random streams drawn from one seed.
enum class Stream : std::uint64_t {
  appearance = 1ULL << 40,
  bag_prior = 2ULL << 40,
  emission = 3ULL << 40,
  labels = 4ULL << 40,
  planting = 5ULL << 40,
  init = 6ULL << 40,
};

inline Rng make_rng(std::uint64_t seed, Stream salt, std::uint64_t index = 0) {
  return make_rng(seed, static_cast<std::uint64_t>(salt) + index);
}

}  // namespace sibp
