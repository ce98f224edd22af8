#include "flashpuf/plan.hpp"

#include <cstdlib>
#include <string>

#include "flashpuf/errors.hpp"
#include "flashpuf/json_io.hpp"

namespace flashpuf {

using nlohmann::json;

void ExperimentPlan::validate() const {
  if (device_seeds.empty()) throw ConfigError("device_seeds", "must list at least one seed");
  if (conditions.empty()) throw ConfigError("conditions", "condition grid is empty");
  if (trials_per_condition < 1) throw ConfigError("trials_per_condition", "must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir", "no output directory given");
  geometry.validate();
  hammer.validate(geometry);
  if (block >= geometry.blocks_per_device) throw ConfigError("block", "outside the geometry");
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    try {
      conditions[i].validate();
    } catch (const ConfigError& e) {
      throw ConfigError("conditions[" + std::to_string(i) + "]", e.what());
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (to_fixed_point(conditions[k]) == to_fixed_point(conditions[i])) {
        throw ConfigError("conditions[" + std::to_string(i) + "]", "duplicates an earlier condition");
      }
    }
  }
  for (std::size_t i = 0; i < device_seeds.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (device_seeds[k] == device_seeds[i]) {
        throw ConfigError("device_seeds[" + std::to_string(i) + "]", "duplicate seed");
      }
    }
  }
  if (reference_condition && *reference_condition >= conditions.size()) {
    throw ConfigError("reference_condition", "index outside the condition grid");
  }
  if (!(bias_threshold >= 0.0 && bias_threshold <= 0.5)) {
    throw ConfigError("bias_threshold", "must be within [0, 0.5]");
  }
  if (model_source == ModelSource::explicit_params) params.validate();
}

ExperimentPlan plan_from_json(const json& j) {
  using namespace json_io;
  require_object(j, "plan");
  reject_unknown_keys(j, "",
                      {"device_seeds", "geometry", "block", "hammer", "model", "conditions",
                       "trials_per_condition", "output_dir", "reference_condition",
                       "bias_threshold", "threads"});
  ExperimentPlan plan;
  if (j.contains("device_seeds")) {
    const auto& seeds = j.at("device_seeds");
    if (!seeds.is_array()) throw ConfigError("device_seeds", "expected an array");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (!json_io::is_non_negative_integer(seeds[i])) {
        throw ConfigError("device_seeds[" + std::to_string(i) + "]", "expected an unsigned integer");
      }
      plan.device_seeds.push_back(seeds[i].get<std::uint64_t>());
    }
  }
  if (j.contains("geometry")) plan.geometry = geometry_from_json(j.at("geometry"));
  plan.block = get_unsigned(j, "block", "", 0);
  if (j.contains("hammer")) plan.hammer = hammer_from_json(j.at("hammer"));
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m == "calibrated") {
      plan.model_source = ModelSource::calibrated;
    } else if (m == "calibrate") {
      plan.model_source = ModelSource::calibrate_first;
    } else if (m.is_object()) {
      plan.model_source = ModelSource::explicit_params;
      plan.params = params_from_json(m, "model");
    } else {
      throw ConfigError("model", "expected \"calibrated\", \"calibrate\" or a parameter object");
    }
  }
  if (j.contains("conditions")) {
    const auto& conds = j.at("conditions");
    if (!conds.is_array()) throw ConfigError("conditions", "expected an array");
    for (std::size_t i = 0; i < conds.size(); ++i) {
      plan.conditions.push_back(
          condition_from_json(conds[i], "conditions[" + std::to_string(i) + "]"));
    }
  }
  plan.trials_per_condition = get_unsigned(j, "trials_per_condition", "", 20);
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("output_dir", "expected a string");
    plan.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("reference_condition")) {
    plan.reference_condition = get_unsigned(j, "reference_condition", "", 0);
  }
  plan.bias_threshold = get_number(j, "bias_threshold", "", plan.bias_threshold);
  plan.threads = static_cast<unsigned>(get_unsigned(j, "threads", "", 1));
  return plan;
}

json to_json(const ExperimentPlan& plan) {
  json conds = json::array();
  for (const auto& c : plan.conditions) conds.push_back(json_io::to_json(c));
  json out = {{"device_seeds", plan.device_seeds},
              {"geometry", json_io::to_json(plan.geometry)},
              {"block", plan.block},
              {"hammer", json_io::to_json(plan.hammer)},
              {"conditions", conds},
              {"trials_per_condition", plan.trials_per_condition},
              {"output_dir", plan.output_dir.string()},
              {"bias_threshold", plan.bias_threshold}};
  switch (plan.model_source) {
    case ModelSource::calibrated: out["model"] = "calibrated"; break;
    case ModelSource::calibrate_first: out["model"] = "calibrate"; break;
    case ModelSource::explicit_params: out["model"] = json_io::to_json(plan.params); break;
  }
  if (plan.reference_condition) out["reference_condition"] = *plan.reference_condition;
  return out;
}

void apply_seed_overrides(ExperimentPlan& plan, std::optional<std::uint64_t> cli_seed,
                          std::optional<std::uint64_t> env_seed) {
  if (cli_seed) {
    plan.device_seeds = {*cli_seed};
  } else if (plan.device_seeds.empty() && env_seed) {
    plan.device_seeds = {*env_seed};
  }
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("FLASHPUF_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string text(raw);
    if (text.front() == '-') throw std::invalid_argument("negative");
    const auto value = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw ConfigError("FLASHPUF_SEED", "expected an unsigned 64-bit integer");
  }
}

}  // namespace flashpuf
