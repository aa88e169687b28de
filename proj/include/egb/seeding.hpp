#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace egb::seeding {

// All randomness in a search derives from a master seed through the mixers
// below, so results do not depend on scheduling or worker count.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Seed domains keep the step stream, branch streams and replica streams
/// from colliding for the same (beam, step) pair.
enum class Domain : uint64_t { step = 0, branch = 1, replica = 2 };

/// Root seed of trajectory `slot` under a master seed. Intentionally a plain
/// additive derivation: trajectory j of a K-wide run equals a standalone run
/// whose seed is `root_seed(master, j)`.
inline uint64_t root_seed(uint64_t master, uint64_t slot) {
  return master + slot * kGolden;
}

/// Seed of the candidate generated from a beam with seed `parent` at step
/// `step`, branch `branch`. The surviving candidate carries this value as its
/// own beam seed, so every trajectory is a pure function of its root seed.
inline uint64_t candidate_seed(uint64_t parent, uint64_t step, uint64_t branch,
                               Domain domain = Domain::step) {
  uint64_t h = splitmix64(parent ^ splitmix64(step));
  h = splitmix64(h ^ splitmix64(branch * 3 + static_cast<uint64_t>(domain)));
  return h;
}

/// FNV-1a over a string, for deriving per-problem / per-sweep-value seeds.
inline uint64_t hash_string(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace egb::seeding
