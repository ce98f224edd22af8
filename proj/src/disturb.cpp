#include "flashpuf/disturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "flashpuf/counter_rng.hpp"
#include "flashpuf/errors.hpp"

namespace flashpuf {

namespace {

constexpr std::uint64_t kCellStream = 0x63656C6C5F7A6900ULL;   // "cell_zi"
constexpr std::uint64_t kPageStream = 0x706167655F627000ULL;   // "page_bp"
constexpr std::uint64_t kTrialStream = 0x747269616C000000ULL;  // "trial"

}  // namespace

void EnvironmentCondition::validate() const {
  if (!(temperature_celsius >= -40.0 && temperature_celsius <= 125.0)) {
    throw ConfigError("condition.temperature_celsius", "must be within [-40, 125]");
  }
  if (!(supply_voltage > 0.0 && supply_voltage <= 6.0)) {
    throw ConfigError("condition.supply_voltage", "must be within (0, 6]");
  }
}

std::string EnvironmentCondition::label() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "T%.2fC_V%.3f_reg%d", temperature_celsius, supply_voltage,
                regulator_enabled ? 1 : 0);
  return buf;
}

FixedPointCondition to_fixed_point(const EnvironmentCondition& cond) {
  return {static_cast<std::int32_t>(std::llround(cond.temperature_celsius * 100.0)),
          static_cast<std::uint32_t>(std::llround(cond.supply_voltage * 1000.0)),
          static_cast<std::uint8_t>(cond.regulator_enabled ? 1 : 0)};
}

EnvironmentCondition from_fixed_point(const FixedPointCondition& fixed) {
  return {fixed.centi_celsius / 100.0, fixed.millivolts / 1000.0, fixed.regulator != 0};
}

std::uint64_t condition_digest(const EnvironmentCondition& cond) {
  const auto fixed = to_fixed_point(cond);
  return rng::combine(static_cast<std::uint64_t>(static_cast<std::uint32_t>(fixed.centi_celsius)),
                      fixed.millivolts, fixed.regulator);
}

void DisturbModelParams::validate() const {
  if (!(base_rate > 0.0 && base_rate < 1.0)) {
    throw ConfigError("params.base_rate", "must be within (0, 1)");
  }
  if (!(susceptibility_sigma >= 0.0)) {
    throw ConfigError("params.susceptibility_sigma", "must be >= 0");
  }
  if (!(page_sigma >= 0.0)) throw ConfigError("params.page_sigma", "must be >= 0");
  if (!(nominal_voltage > 0.0)) throw ConfigError("params.nominal_voltage", "must be > 0");
  if (!std::isfinite(temp_coeff)) throw ConfigError("params.temp_coeff", "must be finite");
  if (!std::isfinite(volt_coeff)) throw ConfigError("params.volt_coeff", "must be finite");
  if (!std::isfinite(nominal_temperature)) {
    throw ConfigError("params.nominal_temperature", "must be finite");
  }
  if (!(regulator_dropout >= 0.0)) throw ConfigError("params.regulator_dropout", "must be >= 0");
  if (!(regulator_headroom_gain >= 0.0 && regulator_headroom_gain <= 1.0)) {
    throw ConfigError("params.regulator_headroom_gain", "must be within [0, 1]");
  }
}

DeviceIdentity::DeviceIdentity(std::uint64_t device_seed) noexcept
    : seed_(device_seed),
      cell_key_(rng::combine(device_seed, kCellStream)),
      page_key_(rng::combine(device_seed, kPageStream)) {}

double DeviceIdentity::cell_susceptibility(std::uint64_t cell_index) const noexcept {
  return rng::standard_normal(cell_key_, cell_index);
}

double DeviceIdentity::page_coupling(std::uint64_t page_index) const noexcept {
  return rng::standard_normal(page_key_, page_index);
}

TrialNoise TrialNoise::derive(std::uint64_t device_seed, std::size_t block, std::size_t trial,
                              const EnvironmentCondition& cond) noexcept {
  return {rng::combine(device_seed, kTrialStream, block, trial, condition_digest(cond))};
}

double TrialNoise::uniform(std::uint64_t cell_index) const noexcept {
  return rng::uniform(trial_seed, cell_index);
}

double effective_voltage(const EnvironmentCondition& cond, const DisturbModelParams& params) {
  if (!cond.regulator_enabled) return cond.supply_voltage;
  const double nominal = params.nominal_voltage;
  if (cond.supply_voltage >= nominal - params.regulator_dropout) return nominal;
  return cond.supply_voltage + params.regulator_headroom_gain * (nominal - cond.supply_voltage);
}

double per_exposure_flip_prob(const DisturbModelParams& params, double z, double b,
                              const EnvironmentCondition& cond) {
  const double v_eff = effective_voltage(cond, params);
  const double exponent =
      params.susceptibility_sigma * z + params.page_sigma * b +
      params.temp_coeff * (cond.temperature_celsius - params.nominal_temperature) / 10.0 +
      params.volt_coeff * (params.nominal_voltage - v_eff);
  return std::clamp(params.base_rate * std::exp(exponent), 0.0, 1.0);
}

std::uint64_t flip_exposure_from_uniform(double p, double u) noexcept {
  if (p <= 0.0) return kNeverFlips;
  if (p >= 1.0) return 1;
  const double exposure = std::ceil(std::log(u) / std::log1p(-p));
  if (!(exposure < 1.8e19)) return kNeverFlips;
  return exposure < 1.0 ? 1 : static_cast<std::uint64_t>(exposure);
}

std::optional<std::uint64_t> sample_flip_exposure(double p, const TrialNoise& noise,
                                                  std::uint64_t cell_index) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError("flip probability must be within [0, 1]");
  }
  const std::uint64_t exposure = flip_exposure_from_uniform(p, noise.uniform(cell_index));
  if (exposure == kNeverFlips) return std::nullopt;
  return exposure;
}

std::vector<double> page_flip_probabilities(const DeviceIdentity& identity,
                                            const FlashGeometry& geometry, PageAddress page,
                                            const DisturbModelParams& params,
                                            const EnvironmentCondition& cond) {
  const std::uint64_t page_index = page.block * geometry.pages_per_block + page.page;
  const std::uint64_t first_cell = page_index * geometry.bits_per_page();
  const double coupling = identity.page_coupling(page_index);
  std::vector<double> probabilities(geometry.bits_per_page());
  for (std::size_t cell = 0; cell < probabilities.size(); ++cell) {
    probabilities[cell] = per_exposure_flip_prob(
        params, identity.cell_susceptibility(first_cell + cell), coupling, cond);
  }
  return probabilities;
}

std::vector<std::uint64_t> page_flip_exposures(std::span<const double> probabilities,
                                               const FlashGeometry& geometry, PageAddress page,
                                               const TrialNoise& noise) {
  if (probabilities.size() != geometry.bits_per_page()) {
    throw SizeError("probability map does not cover the page");
  }
  const std::uint64_t first_cell =
      (page.block * geometry.pages_per_block + page.page) * geometry.bits_per_page();
  std::vector<std::uint64_t> exposures(probabilities.size());
  for (std::size_t cell = 0; cell < exposures.size(); ++cell) {
    exposures[cell] =
        flip_exposure_from_uniform(probabilities[cell], noise.uniform(first_cell + cell));
  }
  return exposures;
}

std::size_t apply_sampled_exposures(FlashDevice& device, PageAddress victim,
                                    std::span<const std::uint64_t> flip_exposures,
                                    std::uint64_t exposures_delta) {
  if (flip_exposures.size() != device.geometry().bits_per_page()) {
    throw SizeError("flip exposure map does not cover the page");
  }
  const std::uint64_t window_end = device.exposures(victim) + exposures_delta;
  device.record_exposures(victim, exposures_delta);
  std::size_t flipped = 0;
  for (std::size_t cell = 0; cell < flip_exposures.size(); ++cell) {
    if (flip_exposures[cell] <= window_end && device.disturb_cell(victim, cell)) ++flipped;
  }
  return flipped;
}

std::size_t apply_exposures(FlashDevice& device, PageAddress victim, std::uint64_t exposures_delta,
                            const TrialNoise& trial, const DisturbModelParams& params,
                            const EnvironmentCondition& cond) {
  const auto& geometry = device.geometry();
  device.page_view(victim);  // address check before sampling
  const auto probabilities =
      page_flip_probabilities(DeviceIdentity(device.device_seed()), geometry, victim, params, cond);
  const auto exposures = page_flip_exposures(probabilities, geometry, victim, trial);
  return apply_sampled_exposures(device, victim, exposures, exposures_delta);
}

}  // namespace flashpuf
