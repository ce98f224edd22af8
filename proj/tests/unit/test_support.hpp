#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "flashpuf/disturb.hpp"
#include "flashpuf/flash_device.hpp"
#include "flashpuf/protocol.hpp"

namespace flashpuf::testing {

// 4.0 V with volt_coeff = +/-1000 pushes every flip probability to exactly
// 1 or exactly 0 (exp underflow), independent of the device field.
inline const EnvironmentCondition kDegenerateCondition{20.0, 4.0, false};

inline DisturbModelParams always_flip_params() {
  DisturbModelParams p;
  p.base_rate = 0.5;
  p.susceptibility_sigma = 0.0;
  p.volt_coeff = 1000.0;
  return p;
}

inline DisturbModelParams never_flip_params() {
  DisturbModelParams p;
  p.base_rate = 0.5;
  p.susceptibility_sigma = 0.0;
  p.volt_coeff = -1000.0;
  return p;
}

// Small block keeping the default ratios (255/256 disturbed bytes).
inline FlashGeometry small_geometry() { return {8, 64, 1}; }

inline HammerConfig small_hammer() {
  HammerConfig cfg;
  cfg.min_disturbed_addresses = 63;
  return cfg;
}

inline std::vector<std::uint8_t> random_bytes(std::mt19937_64& gen, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& b : out) b = static_cast<std::uint8_t>(byte(gen));
  return out;
}

// Literal per-bit loop; independent of the word-wise popcount path.
inline std::size_t naive_ones(const std::vector<std::uint8_t>& bytes) {
  std::size_t n = 0;
  for (auto b : bytes) {
    for (int bit = 0; bit < 8; ++bit) n += (b >> bit) & 1u;
  }
  return n;
}

}  // namespace flashpuf::testing
