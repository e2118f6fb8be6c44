#pragma once

#include <cstdint>

namespace seqbench {

// splitmix64-based generator. The algorithm and all constants are fixed, so
// a given seed yields the same draw sequence on every platform. Single-owner
// mutable state: derive children with child() instead of sharing.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller, one spare cached.
  double gaussian();

  // Deterministic sub-stream keyed by tag; independent of this stream's position.
  Rng child(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace seqbench
