#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace koopman {

// Deterministic, platform-independent RNG.
//
// splitmix64 core with named-stream splitting: every consumer derives its own
// stream from (root seed, stream name), so adding a consumer never perturbs
// the draws seen by others. We avoid <random> distributions on purpose —
// their output is implementation-defined, and reproducibility across
// compilers is part of the library contract.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  std::uint64_t state_;
};

// Root seed that hands out independent named streams.
class RootRng {
 public:
  explicit RootRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Derive a child seed from the stream name (FNV-1a over the bytes, then
  // mixed with the root seed through one splitmix64 round).
  std::uint64_t derive(std::string_view name) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ULL;
    }
    RngStream mix(seed_ ^ h);
    return mix.next_u64();
  }

  RngStream stream(std::string_view name) const { return RngStream(derive(name)); }

 private:
  std::uint64_t seed_;
};

}  // namespace koopman
