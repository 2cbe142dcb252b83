#pragma once

#include <cstdint>

namespace shipwright {

// 64-bit avalanche finalizer (splitmix64 finalizer constants).
//
// These constants are frozen: sample membership, shuffled data generation
// and every golden test in this repo depend on them bit-for-bit. Changing
// them is a breaking change.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Minimal splitmix64 stream; used where a seeded sequence is needed
// (Fisher-Yates shuffles, test data). Not used for sample membership,
// which is a pure function of (seed, index) via mix64.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform value in [0, bound) via Lemire's multiply-shift reduction.
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace shipwright
