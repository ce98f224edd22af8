#include "flashpuf/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>

#include "flashpuf/errors.hpp"
#include "flashpuf/json_io.hpp"
#include "flashpuf/metrics.hpp"

namespace flashpuf {

namespace {

using nlohmann::json;

std::vector<ResponseSet> simulate(const DisturbModelParams& params, const CalibrationSearch& search,
                                  const EnvironmentCondition& cond) {
  std::vector<ResponseSet> sets;
  for (std::uint64_t seed : search.seeds) {
    sets.push_back(collect_responses(FlashDevice(search.geometry, seed), 0, search.hammer, params,
                                     cond, search.trials, {search.threads}));
  }
  return sets;
}

double pooled_fhw(const std::vector<ResponseSet>& sets) {
  double sum = 0.0;
  for (const auto& s : sets) sum += overall_mean_fhw(s);
  return sum / static_cast<double>(sets.size());
}

// Bisection for a monotonically decreasing response; returns the argument
// whose response is closest to `target` among the probed points.
template <typename Response>
double bisect_decreasing(double lo, double hi, double target, unsigned steps, Response&& response) {
  double best = lo;
  double best_gap = std::numeric_limits<double>::infinity();
  for (unsigned i = 0; i < steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double value = response(mid);
    const double gap = std::abs(value - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = mid;
    }
    if (value > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

double raw_slack(const CalibrationMeasurement& m, const CalibrationTargets& t) {
  const double slacks[] = {
      0.05 - std::abs(m.nominal_fhw - t.nominal_fhw),
      m.min_page_spread - t.per_page_spread_min,
      t.nominal_intra_hd_max - m.nominal_intra_hd,
      t.low_voltage_fhw_max - m.low_fhw,
      m.nominal_fhw - m.low_fhw,
      m.cross_intra_hd - t.cross_voltage_intra_hd_min,
  };
  double slack = *std::min_element(std::begin(slacks), std::end(slacks));
  if (m.min_biased_pages < t.min_biased_pages) slack = std::min(slack, -0.01);
  return slack;
}

double margined_violation(const CalibrationMeasurement& m, const CalibrationTargets& t,
                          double margin) {
  auto sq = [](double v) { return v > 0.0 ? v * v : 0.0; };
  double v = sq(std::abs(m.nominal_fhw - t.nominal_fhw) - margin) +
             sq(t.per_page_spread_min + margin - m.min_page_spread) +
             sq(m.nominal_intra_hd - (t.nominal_intra_hd_max - margin)) +
             sq(m.low_fhw - t.low_voltage_fhw_max) +
             sq(t.cross_voltage_intra_hd_min + margin - m.cross_intra_hd);
  if (m.min_biased_pages < t.min_biased_pages) {
    v += sq(0.05 * static_cast<double>(t.min_biased_pages - m.min_biased_pages));
  }
  return v;
}

std::string describe(const CalibrationCandidate& c) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "base_rate=%.6g sigma=%.3f page_sigma=%.3f volt_coeff=%.4f | nominal_fhw=%.4f "
                "low_fhw=%.4f spread=%.4f biased=%zu intra=%.4f cross=%.4f | slack=%.4f",
                c.params.base_rate, c.params.susceptibility_sigma, c.params.page_sigma,
                c.params.volt_coeff, c.achieved.nominal_fhw, c.achieved.low_fhw,
                c.achieved.min_page_spread, c.achieved.min_biased_pages,
                c.achieved.nominal_intra_hd, c.achieved.cross_intra_hd, c.slack);
  return buf;
}

}  // namespace

CalibrationMeasurement measure(const DisturbModelParams& params, const CalibrationSearch& search) {
  const auto nominal = simulate(params, search, search.nominal);
  const auto low = simulate(params, search, search.low);
  CalibrationMeasurement m;
  m.nominal_fhw = pooled_fhw(nominal);
  m.low_fhw = pooled_fhw(low);
  m.min_page_spread = std::numeric_limits<double>::infinity();
  m.min_biased_pages = std::numeric_limits<std::size_t>::max();
  m.nominal_halt_min = m.low_halt_min = std::numeric_limits<std::uint64_t>::max();
  double intra = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < nominal.size(); ++i) {
    const auto pages = per_instance_fhw(nominal[i]);
    const auto [lo, hi] = std::minmax_element(pages.begin(), pages.end(),
                                              [](auto& a, auto& b) { return a.second < b.second; });
    m.min_page_spread = std::min(m.min_page_spread, hi->second - lo->second);
    m.min_biased_pages = std::min(m.min_biased_pages, bias_flags(pages).size());
    const auto same = intra_device_hd(nominal[i], nominal[i]);
    const auto across = intra_device_hd(nominal[i], low[i]);
    intra += same.stats ? same.stats->mean : 0.0;
    cross += across.stats ? across.stats->mean : 0.0;
    for (std::size_t t = 0; t < nominal[i].trials_per_condition; ++t) {
      m.nominal_halt_min = std::min(m.nominal_halt_min, nominal[i].halt_cycle(t));
      m.nominal_halt_max = std::max(m.nominal_halt_max, nominal[i].halt_cycle(t));
      m.low_halt_min = std::min(m.low_halt_min, low[i].halt_cycle(t));
      m.low_halt_max = std::max(m.low_halt_max, low[i].halt_cycle(t));
    }
  }
  m.nominal_intra_hd = intra / static_cast<double>(nominal.size());
  m.cross_intra_hd = cross / static_cast<double>(nominal.size());
  return m;
}

CalibrationResult calibrate(const CalibrationTargets& targets, const CalibrationSearch& search,
                            bool verbose) {
  if (search.seeds.empty()) throw ConfigError("search.seeds", "must not be empty");
  if (search.trials < 2) throw ConfigError("search.trials", "must be >= 2");
  if (search.susceptibility_sigmas.empty() || search.page_sigmas.empty()) {
    throw ConfigError("search", "sigma grids must not be empty");
  }
  search.hammer.validate(search.geometry);

  CalibrationResult result;
  const double low_target = targets.low_voltage_fhw_max - search.margin;
  for (double sigma : search.susceptibility_sigmas) {
    for (double page_sigma : search.page_sigmas) {
      DisturbModelParams p = search.base;
      p.susceptibility_sigma = sigma;
      p.page_sigma = page_sigma;
      p.volt_coeff = 0.0;

      const double log_rate = bisect_decreasing(
          std::log(search.base_rate_min), std::log(search.base_rate_max), targets.nominal_fhw,
          search.bisection_steps, [&](double x) {
            DisturbModelParams q = p;
            q.base_rate = std::exp(x);
            return pooled_fhw(simulate(q, search, search.nominal));
          });
      p.base_rate = std::exp(log_rate);

      p.volt_coeff = bisect_decreasing(search.volt_coeff_min, search.volt_coeff_max, low_target,
                                       search.bisection_steps, [&](double a) {
                                         DisturbModelParams q = p;
                                         q.volt_coeff = a;
                                         return pooled_fhw(simulate(q, search, search.low));
                                       });

      CalibrationCandidate c;
      c.params = p;
      c.achieved = measure(p, search);
      c.violation = margined_violation(c.achieved, targets, search.margin);
      c.slack = raw_slack(c.achieved, targets);
      if (verbose) std::cerr << "calibrate: " << describe(c) << '\n';
      result.candidates.push_back(c);
    }
  }

  // Prefer candidates meeting the margined targets, then the largest slack.
  result.best = *std::max_element(
      result.candidates.begin(), result.candidates.end(), [](const auto& a, const auto& b) {
        const bool a_ok = a.violation == 0.0, b_ok = b.violation == 0.0;
        if (a_ok != b_ok) return b_ok;
        return a.slack < b.slack;
      });
  if (result.best.slack < 0.0) {
    throw CalibrationError("calibration search exhausted without meeting targets",
                           describe(result.best));
  }
  return result;
}

json to_json(const CalibrationMeasurement& m) {
  return {{"nominal_fhw", m.nominal_fhw},
          {"low_voltage_fhw", m.low_fhw},
          {"min_per_page_spread", m.min_page_spread},
          {"min_biased_pages", m.min_biased_pages},
          {"nominal_intra_hd", m.nominal_intra_hd},
          {"cross_voltage_intra_hd", m.cross_intra_hd},
          {"nominal_halt_cycle_range", {m.nominal_halt_min, m.nominal_halt_max}},
          {"low_voltage_halt_cycle_range", {m.low_halt_min, m.low_halt_max}}};
}

json to_json(const CalibrationTargets& t) {
  return {{"nominal_fhw", t.nominal_fhw},
          {"per_page_spread_min", t.per_page_spread_min},
          {"nominal_intra_hd_max", t.nominal_intra_hd_max},
          {"low_voltage_fhw_max", t.low_voltage_fhw_max},
          {"cross_voltage_intra_hd_min", t.cross_voltage_intra_hd_min},
          {"min_biased_pages", t.min_biased_pages}};
}

CalibrationTargets targets_from_json(const json& j, const std::string& path) {
  using namespace json_io;
  require_object(j, path);
  reject_unknown_keys(j, path,
                      {"nominal_fhw", "per_page_spread_min", "nominal_intra_hd_max",
                       "low_voltage_fhw_max", "cross_voltage_intra_hd_min", "min_biased_pages"});
  CalibrationTargets t;
  t.nominal_fhw = get_number(j, "nominal_fhw", path, t.nominal_fhw);
  t.per_page_spread_min = get_number(j, "per_page_spread_min", path, t.per_page_spread_min);
  t.nominal_intra_hd_max = get_number(j, "nominal_intra_hd_max", path, t.nominal_intra_hd_max);
  t.low_voltage_fhw_max = get_number(j, "low_voltage_fhw_max", path, t.low_voltage_fhw_max);
  t.cross_voltage_intra_hd_min =
      get_number(j, "cross_voltage_intra_hd_min", path, t.cross_voltage_intra_hd_min);
  t.min_biased_pages = get_unsigned(j, "min_biased_pages", path, t.min_biased_pages);
  return t;
}

CalibrationSearch search_from_json(const json& j, const std::string& path) {
  using namespace json_io;
  require_object(j, path);
  reject_unknown_keys(j, path,
                      {"seeds", "trials", "geometry", "hammer", "nominal", "low",
                       "susceptibility_sigmas", "page_sigmas", "base_rate_min", "base_rate_max",
                       "volt_coeff_min", "volt_coeff_max", "bisection_steps", "margin", "base",
                       "threads"});
  CalibrationSearch s;
  auto number_list = [&](const char* key, std::vector<double>& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(path + "." + key, "expected a non-empty array");
    out.clear();
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(path + "." + key, "expected numbers");
      out.push_back(x.get<double>());
    }
  };
  if (j.contains("seeds")) {
    const auto& v = j.at("seeds");
    if (!v.is_array() || v.empty()) throw ConfigError(path + ".seeds", "expected a non-empty array");
    s.seeds.clear();
    for (const auto& x : v) {
      if (!json_io::is_non_negative_integer(x)) throw ConfigError(path + ".seeds", "expected unsigned integers");
      s.seeds.push_back(x.get<std::uint64_t>());
    }
  }
  s.trials = get_unsigned(j, "trials", path, s.trials);
  if (j.contains("geometry")) s.geometry = geometry_from_json(j.at("geometry"), path + ".geometry");
  if (j.contains("hammer")) s.hammer = hammer_from_json(j.at("hammer"), path + ".hammer");
  if (j.contains("nominal")) s.nominal = condition_from_json(j.at("nominal"), path + ".nominal");
  if (j.contains("low")) s.low = condition_from_json(j.at("low"), path + ".low");
  number_list("susceptibility_sigmas", s.susceptibility_sigmas);
  number_list("page_sigmas", s.page_sigmas);
  s.base_rate_min = get_number(j, "base_rate_min", path, s.base_rate_min);
  s.base_rate_max = get_number(j, "base_rate_max", path, s.base_rate_max);
  s.volt_coeff_min = get_number(j, "volt_coeff_min", path, s.volt_coeff_min);
  s.volt_coeff_max = get_number(j, "volt_coeff_max", path, s.volt_coeff_max);
  s.bisection_steps = static_cast<unsigned>(get_unsigned(j, "bisection_steps", path, s.bisection_steps));
  s.margin = get_number(j, "margin", path, s.margin);
  if (j.contains("base")) s.base = params_from_json(j.at("base"), path + ".base");
  s.threads = static_cast<unsigned>(get_unsigned(j, "threads", path, s.threads));
  return s;
}

json calibration_artifact(const CalibrationResult& result, const CalibrationTargets& targets,
                          const CalibrationSearch& search) {
  json doc = json_io::to_json(result.best.params);
  doc["provenance"] = {
      {"generator", "flashpuf calibrate"},
      {"targets", to_json(targets)},
      {"achieved", to_json(result.best.achieved)},
      {"slack", result.best.slack},
      {"search",
       {{"seeds", search.seeds},
        {"trials", search.trials},
        {"geometry", json_io::to_json(search.geometry)},
        {"hammer", json_io::to_json(search.hammer)},
        {"nominal", json_io::to_json(search.nominal)},
        {"low", json_io::to_json(search.low)},
        {"susceptibility_sigmas", search.susceptibility_sigmas},
        {"page_sigmas", search.page_sigmas},
        {"bisection_steps", search.bisection_steps},
        {"margin", search.margin}}}};
  return doc;
}

}  // namespace flashpuf
