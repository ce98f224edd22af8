#pragma once

#include <json.hpp>
#include <string>

#include "flashpuf/disturb.hpp"
#include "flashpuf/flash_device.hpp"
#include "flashpuf/metrics.hpp"
#include "flashpuf/protocol.hpp"

// JSON mapping of the configuration and report types. Readers reject unknown
// keys and report ConfigError with the dotted path of the bad field.
namespace flashpuf::json_io {

using nlohmann::json;

json to_json(const DisturbModelParams& params);
DisturbModelParams params_from_json(const json& j, const std::string& path = "params");

json to_json(const FlashGeometry& geometry);
FlashGeometry geometry_from_json(const json& j, const std::string& path = "geometry");

json to_json(const HammerConfig& cfg);
HammerConfig hammer_from_json(const json& j, const std::string& path = "hammer");

json to_json(const EnvironmentCondition& cond);
EnvironmentCondition condition_from_json(const json& j, const std::string& path = "condition");

json to_json(const DistributionSummary& summary);
DistributionSummary summary_from_json(const json& j, const std::string& path);

json to_json(const MetricsReport& report);
MetricsReport report_from_json(const json& j, const std::string& path = "report");

// Parameters shipped with the build (data/calibrated_params.json).
DisturbModelParams calibrated_params();
const json& calibrated_params_document();

// Helpers shared by the other readers.
void require_object(const json& j, const std::string& path);
void reject_unknown_keys(const json& j, const std::string& path,
                         std::initializer_list<const char*> known);
double get_number(const json& j, const char* key, const std::string& path, double fallback);
std::uint64_t get_unsigned(const json& j, const char* key, const std::string& path,
                           std::uint64_t fallback);
bool get_bool(const json& j, const char* key, const std::string& path, bool fallback);
inline bool is_non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace flashpuf::json_io
