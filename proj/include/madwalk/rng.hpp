#pragma once

// Counter-based randomness. Every random quantity in the library is a pure
// function of (seed, address), so lazily explored structures do not depend on
// exploration order and parallel runs are reproducible.

#include <cstdint>
#include <limits>

namespace madwalk {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hashCombine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h + kGolden * (v + 1) + (h << 6) + (h >> 2));
}

/// Top 53 bits as a double in [0, 1).
constexpr double unitInterval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Top 53 bits as a double in (0, 1].
constexpr double unitIntervalOpenLeft(std::uint64_t bits) noexcept {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Derive an independent stream seed from a master seed and a stream index.
constexpr std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t stream) noexcept {
  return mix64(mix64(master) ^ mix64(stream * kGolden + 0x632be59bd9b4e019ULL));
}

/// SplitMix64 as a UniformRandomBitGenerator: output i is mix64(seed + i*golden).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform variate in [0, 1).
  constexpr double uniform() noexcept { return unitInterval((*this)()); }

  static constexpr CounterRng stream(std::uint64_t master, std::uint64_t index) noexcept {
    return CounterRng(deriveSeed(master, index));
  }

 private:
  std::uint64_t state_;
};

}  // namespace madwalk
