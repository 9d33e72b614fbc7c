// rng.hpp - counter-based deterministic random number generation.
//
// Every draw is a pure function of (seed, stream, index), so the same value
// can be regenerated at any time and in any order. This is what lets the
// trajectory engines replay an operator sequence without storing per-step
// state.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace orderlab::rng {

// Named streams. Draws from distinct streams are treated as independent.
namespace stream {
inline constexpr std::uint64_t noise = 0x6e6f697365ull;         // gradient noise
inline constexpr std::uint64_t batch_order = 0x6f72646572ull;   // batch sampling
inline constexpr std::uint64_t init = 0x696e6974ull;            // parameter init
inline constexpr std::uint64_t coin = 0x636f696eull;            // two-point choice
inline constexpr std::uint64_t pairs = 0x7061697273ull;         // contraction probes
inline constexpr std::uint64_t split = 0x73706c6974ull;         // batch splitting
}  // namespace stream

// SplitMix64 step: adds the golden-gamma and applies the avalanche
// finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// 64-bit word addressed by (seed, stream, index).
constexpr std::uint64_t word(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t index) noexcept {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

/// Uniform double in [0, 1), 53 mantissa bits.
inline double uniform01(std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t index) noexcept {
  return static_cast<double>(word(seed, stream, index) >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1]; safe as a Box-Muller log argument.
inline double uniform_open(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t index) noexcept {
  return static_cast<double>((word(seed, stream, index) >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal variate via Box-Muller; consumes word indices
/// 2*index and 2*index + 1.
inline double gaussian(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t index) noexcept {
  const double u1 = uniform_open(seed, stream, 2 * index);
  const double u2 = uniform01(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform integer in [0, n). Modulo bias is below n/2^64 and ignored.
constexpr std::uint64_t below(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t index, std::uint64_t n) noexcept {
  return word(seed, stream, index) % n;
}

/// Fair coin.
constexpr bool flip(std::uint64_t seed, std::uint64_t stream,
                    std::uint64_t index) noexcept {
  return (word(seed, stream, index) >> 63) != 0;
}

}  // namespace orderlab::rng
