#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "flashpuf/calibration.hpp"
#include "flashpuf/disturb.hpp"
#include "flashpuf/flash_device.hpp"
#include "flashpuf/protocol.hpp"

namespace flashpuf {

enum class ModelSource {
  calibrated,       // parameters shipped with the build
  explicit_params,  // "model": { ...params... }
  calibrate_first,  // run the calibration search before simulating
};

struct ExperimentPlan {
  std::vector<std::uint64_t> device_seeds;
  FlashGeometry geometry;
  std::size_t block = 0;
  HammerConfig hammer;
  ModelSource model_source = ModelSource::calibrated;
  DisturbModelParams params;
  std::vector<EnvironmentCondition> conditions;
  std::size_t trials_per_condition = 20;
  std::filesystem::path output_dir;
  std::optional<std::size_t> reference_condition;
  double bias_threshold = 0.15;
  unsigned threads = 1;

  // Throws ConfigError naming the field. Runs before any simulation.
  void validate() const;
};

ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentPlan& plan);

// Seed precedence: explicit CLI seed, then the plan's device_seeds, then the
// FLASHPUF_SEED environment value.
void apply_seed_overrides(ExperimentPlan& plan, std::optional<std::uint64_t> cli_seed,
                          std::optional<std::uint64_t> env_seed);

// Parses FLASHPUF_SEED; nullopt when unset. Throws ConfigError when malformed.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace flashpuf
