#include <algorithm>
#include <string_view>

#include "flashpuf/errors.hpp"
#include "flashpuf/json_io.hpp"

namespace flashpuf::json_io {

namespace detail {
extern const std::string_view kCalibratedParamsJson;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

static std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void reject_unknown_keys(const json& j, const std::string& path,
                         std::initializer_list<const char*> known) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(join_path(path, key), "unknown field");
    }
  }
}

double get_number(const json& j, const char* key, const std::string& path, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join_path(path, key), "expected a number");
  return v.get<double>();
}

std::uint64_t get_unsigned(const json& j, const char* key, const std::string& path,
                           std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!is_non_negative_integer(v)) throw ConfigError(join_path(path, key), "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, const std::string& path, bool fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(join_path(path, key), "expected true or false");
  return v.get<bool>();
}

json to_json(const DisturbModelParams& p) {
  return {{"base_rate", p.base_rate},
          {"susceptibility_sigma", p.susceptibility_sigma},
          {"page_sigma", p.page_sigma},
          {"temp_coeff", p.temp_coeff},
          {"volt_coeff", p.volt_coeff},
          {"nominal_voltage", p.nominal_voltage},
          {"nominal_temperature", p.nominal_temperature},
          {"regulator_dropout", p.regulator_dropout},
          {"regulator_headroom_gain", p.regulator_headroom_gain}};
}

DisturbModelParams params_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path,
                      {"base_rate", "susceptibility_sigma", "page_sigma", "temp_coeff",
                       "volt_coeff", "nominal_voltage", "nominal_temperature",
                       "regulator_dropout", "regulator_headroom_gain", "provenance"});
  DisturbModelParams p;
  p.base_rate = get_number(j, "base_rate", path, p.base_rate);
  p.susceptibility_sigma = get_number(j, "susceptibility_sigma", path, p.susceptibility_sigma);
  p.page_sigma = get_number(j, "page_sigma", path, p.page_sigma);
  p.temp_coeff = get_number(j, "temp_coeff", path, p.temp_coeff);
  p.volt_coeff = get_number(j, "volt_coeff", path, p.volt_coeff);
  p.nominal_voltage = get_number(j, "nominal_voltage", path, p.nominal_voltage);
  p.nominal_temperature = get_number(j, "nominal_temperature", path, p.nominal_temperature);
  p.regulator_dropout = get_number(j, "regulator_dropout", path, p.regulator_dropout);
  p.regulator_headroom_gain =
      get_number(j, "regulator_headroom_gain", path, p.regulator_headroom_gain);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    // validate() reports "params.<field>"; re-root it at the caller's path.
    const std::string field = e.field().substr(e.field().find('.') + 1);
    throw ConfigError(path + "." + field, std::string(e.what()).substr(e.field().size() + 2));
  }
  return p;
}

json to_json(const FlashGeometry& g) {
  return {{"pages_per_block", g.pages_per_block},
          {"bytes_per_page", g.bytes_per_page},
          {"blocks_per_device", g.blocks_per_device}};
}

FlashGeometry geometry_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path, {"pages_per_block", "bytes_per_page", "blocks_per_device"});
  FlashGeometry g;
  g.pages_per_block = get_unsigned(j, "pages_per_block", path, g.pages_per_block);
  g.bytes_per_page = get_unsigned(j, "bytes_per_page", path, g.bytes_per_page);
  g.blocks_per_device = get_unsigned(j, "blocks_per_device", path, g.blocks_per_device);
  try {
    g.validate();
  } catch (const ConfigError& e) {
    const std::string field = e.field().substr(e.field().find('.') + 1);
    throw ConfigError(path + "." + field, std::string(e.what()).substr(e.field().size() + 2));
  }
  return g;
}

json to_json(const HammerConfig& c) {
  return {{"max_cycles", c.max_cycles},
          {"min_disturbed_addresses", c.min_disturbed_addresses},
          {"program_pattern", c.program_pattern},
          {"stop_scope", c.stop_scope == StopScope::all_victims ? "all_victims" : "any_victim"}};
}

HammerConfig hammer_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path,
                      {"max_cycles", "min_disturbed_addresses", "program_pattern", "stop_scope"});
  HammerConfig c;
  c.max_cycles = get_unsigned(j, "max_cycles", path, c.max_cycles);
  c.min_disturbed_addresses =
      get_unsigned(j, "min_disturbed_addresses", path, c.min_disturbed_addresses);
  const auto pattern = get_unsigned(j, "program_pattern", path, c.program_pattern);
  if (pattern > 0xFF) throw ConfigError(path + ".program_pattern", "must be a byte value");
  c.program_pattern = static_cast<std::uint8_t>(pattern);
  if (j.contains("stop_scope")) {
    const auto& v = j.at("stop_scope");
    if (v == "all_victims") {
      c.stop_scope = StopScope::all_victims;
    } else if (v == "any_victim") {
      c.stop_scope = StopScope::any_victim;
    } else {
      throw ConfigError(path + ".stop_scope", "expected \"all_victims\" or \"any_victim\"");
    }
  }
  return c;
}

json to_json(const EnvironmentCondition& c) {
  return {{"temperature_c", c.temperature_celsius},
          {"supply_voltage_v", c.supply_voltage},
          {"regulator", c.regulator_enabled}};
}

EnvironmentCondition condition_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path, {"temperature_c", "supply_voltage_v", "regulator"});
  EnvironmentCondition c;
  c.temperature_celsius = get_number(j, "temperature_c", path, c.temperature_celsius);
  c.supply_voltage = get_number(j, "supply_voltage_v", path, c.supply_voltage);
  c.regulator_enabled = get_bool(j, "regulator", path, c.regulator_enabled);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path, std::string(e.what()));
  }
  return c;
}

json to_json(const DistributionSummary& s) {
  json out = {{"count", s.count}};
  if (!s.stats) {
    out["stats"] = nullptr;
    return out;
  }
  const auto& st = *s.stats;
  out["stats"] = {{"mean", st.mean}, {"min", st.min}, {"max", st.max}, {"p01", st.p01},
                  {"p25", st.p25},   {"p50", st.p50}, {"p75", st.p75}, {"p99", st.p99}};
  return out;
}

DistributionSummary summary_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  DistributionSummary s;
  s.count = get_unsigned(j, "count", path, 0);
  if (j.contains("stats") && !j.at("stats").is_null()) {
    const auto& st = j.at("stats");
    const std::string sp = path + ".stats";
    require_object(st, sp);
    s.stats = SummaryStats{get_number(st, "mean", sp, 0), get_number(st, "min", sp, 0),
                           get_number(st, "max", sp, 0),  get_number(st, "p01", sp, 0),
                           get_number(st, "p25", sp, 0),  get_number(st, "p50", sp, 0),
                           get_number(st, "p75", sp, 0),  get_number(st, "p99", sp, 0)};
  }
  return s;
}

json to_json(const MetricsReport& r) {
  json per_page = json::array();
  for (const auto& [page, fhw] : r.per_instance_fhw) {
    per_page.push_back({{"page", page},
                        {"fhw", fhw},
                        {"intra_hd", to_json(r.intra_hd_per_instance.at(page))}});
  }
  json flags = json::array();
  for (const auto& f : r.bias_flags) {
    flags.push_back({{"page", f.page},
                     {"direction", f.direction == BiasDirection::toward_zero ? "zero" : "one"},
                     {"fhw", f.fhw}});
  }
  json out = {{"device_seed", r.device_seed},
              {"block", r.block},
              {"condition", to_json(r.condition)},
              {"condition_label", r.condition_label},
              {"trials", r.trials},
              {"halt_cycles", r.halt_cycles},
              {"overall_mean_fhw", r.overall_mean_fhw},
              {"per_instance", per_page},
              {"intra_hd_pooled", to_json(r.intra_hd_pooled)},
              {"bias_threshold", r.bias_threshold},
              {"bias_flags", flags}};
  out["inter_hd"] = r.inter_hd ? to_json(*r.inter_hd) : json(nullptr);
  if (r.cross_condition_hd) {
    out["cross_condition_hd"] = {{"reference", to_json(r.cross_condition_hd->reference)},
                                 {"summary", to_json(r.cross_condition_hd->summary)}};
  } else {
    out["cross_condition_hd"] = nullptr;
  }
  return out;
}

MetricsReport report_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  MetricsReport r;
  try {
    r.device_seed = j.at("device_seed").get<std::uint64_t>();
    r.block = j.at("block").get<std::size_t>();
    r.condition = condition_from_json(j.at("condition"), path + ".condition");
    r.condition_label = j.at("condition_label").get<std::string>();
    r.trials = j.at("trials").get<std::size_t>();
    r.halt_cycles = j.at("halt_cycles").get<std::vector<std::uint64_t>>();
    r.overall_mean_fhw = j.at("overall_mean_fhw").get<double>();
    for (const auto& entry : j.at("per_instance")) {
      const auto page = entry.at("page").get<std::size_t>();
      r.per_instance_fhw[page] = entry.at("fhw").get<double>();
      r.intra_hd_per_instance[page] =
          summary_from_json(entry.at("intra_hd"), path + ".per_instance.intra_hd");
    }
    r.intra_hd_pooled = summary_from_json(j.at("intra_hd_pooled"), path + ".intra_hd_pooled");
    r.bias_threshold = j.at("bias_threshold").get<double>();
    for (const auto& f : j.at("bias_flags")) {
      r.bias_flags.push_back({f.at("page").get<std::size_t>(),
                              f.at("direction") == "zero" ? BiasDirection::toward_zero
                                                          : BiasDirection::toward_one,
                              f.at("fhw").get<double>()});
    }
    if (!j.at("inter_hd").is_null()) r.inter_hd = summary_from_json(j.at("inter_hd"), path);
    if (!j.at("cross_condition_hd").is_null()) {
      const auto& c = j.at("cross_condition_hd");
      r.cross_condition_hd =
          CrossConditionHd{condition_from_json(c.at("reference"), path + ".reference"),
                           summary_from_json(c.at("summary"), path + ".summary")};
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": malformed report (" + e.what() + ")");
  }
  return r;
}

const json& calibrated_params_document() {
  static const json doc = json::parse(detail::kCalibratedParamsJson);
  return doc;
}

DisturbModelParams calibrated_params() {
  static const DisturbModelParams params =
      params_from_json(calibrated_params_document(), "calibrated_params");
  return params;
}

}  // namespace flashpuf::json_io
