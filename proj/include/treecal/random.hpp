#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace treecal {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

// Derive an independent stream key from a parent seed and a tag path.
// derive_seed(s, {a, b}) != derive_seed(s, {b, a}) in general.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(seed + golden_gamma);
  for (auto t : tags) {
    h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
  }
  return h;
}

// Map 64 random bits onto [0, 1) with 53 bits of resolution.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based uniform: the value at (key, counter) is independent of the
// order in which counters are visited.
constexpr double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return to_unit(mix64(key + (counter + 1) * golden_gamma));
}

// Sequential SplitMix64 engine. Satisfies UniformRandomBitGenerator, but the
// library only draws through uniform() and below() so results do not depend
// on the standard library's distribution implementations.
class Rng {
public:
  using result_type = std::uint64_t;

  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += golden_gamma;
    return mix64(state_);
  }

  constexpr double uniform() noexcept { return to_unit((*this)()); }

  // Unbiased integer in [0, bound), Lemire's multiply-and-reject.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

private:
  std::uint64_t state_;
};

} // namespace treecal
