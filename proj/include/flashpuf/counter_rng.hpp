#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based random streams. Every draw is a pure function of
// (key, counter), so results do not depend on evaluation order or threading.
namespace flashpuf::rng {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t key, std::uint64_t value) noexcept {
  return mix64(key ^ mix64(value + 0x632BE59BD9B4E019ULL));
}

template <typename... Rest>
constexpr std::uint64_t combine(std::uint64_t key, std::uint64_t value, Rest... rest) noexcept {
  return combine(combine(key, value), rest...);
}

// Uniform in the open interval (0, 1), 53-bit resolution.
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return to_open_unit(combine(key, counter));
}

// Standard normal via Box-Muller on two independent counter draws.
inline double standard_normal(std::uint64_t key, std::uint64_t counter) noexcept {
  const double u1 = to_open_unit(combine(key, counter, 0));
  const double u2 = to_open_unit(combine(key, counter, 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace flashpuf::rng
