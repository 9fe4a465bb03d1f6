#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, label, counter), so results do not depend on the standard library's
// distribution implementations or on the order in which threads consume them.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace hjbtt {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// FNV-1a, used to derive sub-seeds from human readable labels.
constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t seed) : key_(splitmix64(seed)) {}

  /// Independent stream for `label`, e.g. "iv/polynomial" or "qmc/scramble".
  [[nodiscard]] constexpr CounterRng derive(std::string_view label) const {
    return CounterRng(key_ ^ hash_label(label), tag{});
  }
  [[nodiscard]] constexpr CounterRng derive(std::uint64_t index) const {
    return CounterRng(splitmix64(key_ + 0xD1B54A32D192ED03ULL * (index + 1)), tag{});
  }

  [[nodiscard]] constexpr std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key_ ^ splitmix64(counter));
  }

  std::uint64_t next_bits() { return bits(counter_++); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_bits() >> 11) * 0x1.0p-53; }

  double uniform(double low, double high) { return low + (high - low) * uniform(); }

  /// Uniform integer in [low, high] (inclusive), by rejection.
  std::int64_t uniform_int(std::int64_t low, std::int64_t high) {
    const std::uint64_t span = static_cast<std::uint64_t>(high - low) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x = next_bits();
    while (x >= limit) x = next_bits();
    return low + static_cast<std::int64_t>(x % span);
  }

  /// Standard normal via Box-Muller; no cached second value, so the stream
  /// position is always two counters per draw.
  double normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  struct tag {};
  constexpr CounterRng(std::uint64_t key, tag) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace hjbtt
