#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flashpuf/flash_device.hpp"

namespace flashpuf {

struct EnvironmentCondition {
  double temperature_celsius = 20.0;
  double supply_voltage = 5.0;
  bool regulator_enabled = false;

  // Throws ConfigError unless temperature is in [-40, 125] and voltage in (0, 6].
  void validate() const;

  // Short stable label such as "T20.00C_V5.000_reg0".
  std::string label() const;

  bool operator==(const EnvironmentCondition&) const = default;
};

// Integer encoding used by dump headers, trial seeds and equality of
// conditions read back from disk.
struct FixedPointCondition {
  std::int32_t centi_celsius = 0;
  std::uint32_t millivolts = 0;
  std::uint8_t regulator = 0;

  bool operator==(const FixedPointCondition&) const = default;
};

FixedPointCondition to_fixed_point(const EnvironmentCondition& cond);
EnvironmentCondition from_fixed_point(const FixedPointCondition& fixed);
std::uint64_t condition_digest(const EnvironmentCondition& cond);

// Flip-probability model:
//   p = clamp(base_rate * exp(susceptibility_sigma * z + page_sigma * b
//             + temp_coeff * (T - T0) / 10 + volt_coeff * (V0 - V_eff)), 0, 1)
// with z the per-cell and b the per-page standard-normal device field.
struct DisturbModelParams {
  double base_rate = 1e-4;
  double susceptibility_sigma = 1.0;
  double page_sigma = 0.0;
  double temp_coeff = 0.0;  // log-rate per 10 degC
  double volt_coeff = 0.0;  // log-rate per volt below nominal
  double nominal_voltage = 5.0;
  double nominal_temperature = 20.0;
  // Regulator: holds nominal_voltage while supply >= nominal - dropout. Below
  // that it passes supply + headroom_gain * (nominal - supply) through.
  double regulator_dropout = 0.3;
  double regulator_headroom_gain = 0.0;

  void validate() const;

  bool operator==(const DisturbModelParams&) const = default;
};

// Device-unique manufacturing variation, derived on demand from the seed.
class DeviceIdentity {
 public:
  explicit DeviceIdentity(std::uint64_t device_seed) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  // Indices are device-global: cell = page_index * bits_per_page + bit,
  // page_index = block * pages_per_block + page.
  double cell_susceptibility(std::uint64_t cell_index) const noexcept;
  double page_coupling(std::uint64_t page_index) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t cell_key_;
  std::uint64_t page_key_;
};

// Per-trial randomness: one uniform per cell, counter-indexed.
struct TrialNoise {
  std::uint64_t trial_seed = 0;

  static TrialNoise derive(std::uint64_t device_seed, std::size_t block, std::size_t trial,
                           const EnvironmentCondition& cond) noexcept;

  double uniform(std::uint64_t cell_index) const noexcept;
};

double effective_voltage(const EnvironmentCondition& cond, const DisturbModelParams& params);

double per_exposure_flip_prob(const DisturbModelParams& params, double z, double b,
                              const EnvironmentCondition& cond);

// Exposure number at which a cell first flips, or nullopt for never.
// Throws ParameterError if p is outside [0, 1].
std::optional<std::uint64_t> sample_flip_exposure(double p, const TrialNoise& noise,
                                                  std::uint64_t cell_index);

// Sentinel used by the bulk paths below in place of nullopt.
inline constexpr std::uint64_t kNeverFlips = std::numeric_limits<std::uint64_t>::max();

std::uint64_t flip_exposure_from_uniform(double p, double u) noexcept;

// Flip probability of every cell of one page for a given condition.
std::vector<double> page_flip_probabilities(const DeviceIdentity& identity,
                                            const FlashGeometry& geometry, PageAddress page,
                                            const DisturbModelParams& params,
                                            const EnvironmentCondition& cond);

// Sampled flip exposure of every cell of one page for one trial.
std::vector<std::uint64_t> page_flip_exposures(std::span<const double> probabilities,
                                               const FlashGeometry& geometry, PageAddress page,
                                               const TrialNoise& noise);

// Delivers exposures_delta more exposures to the victim page: every cell
// still at 1 whose flip exposure is within the cumulative total flips to 0.
// Returns the number of newly flipped cells.
std::size_t apply_exposures(FlashDevice& device, PageAddress victim, std::uint64_t exposures_delta,
                            const TrialNoise& trial, const DisturbModelParams& params,
                            const EnvironmentCondition& cond);

// Same as apply_exposures with the flip exposures already sampled.
std::size_t apply_sampled_exposures(FlashDevice& device, PageAddress victim,
                                    std::span<const std::uint64_t> flip_exposures,
                                    std::uint64_t exposures_delta);

}  // namespace flashpuf
