#include "flashpuf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include "flashpuf/dump_file.hpp"
#include "flashpuf/errors.hpp"
#include "flashpuf/json_io.hpp"

namespace flashpuf {

namespace fs = std::filesystem;

namespace {

auto fixed_key(const EnvironmentCondition& c) {
  const auto f = to_fixed_point(c);
  return std::make_tuple(f.regulator, f.centi_celsius, f.millivolts);
}

std::string mean_or_blank(const std::vector<double>& values) {
  if (values.empty()) return "";
  double sum = 0.0;
  for (double v : values) sum += v;
  return fixed6(sum / static_cast<double>(values.size()));
}

std::string max_or_blank(const std::vector<double>& values) {
  if (values.empty()) return "";
  return fixed6(*std::max_element(values.begin(), values.end()));
}

}  // namespace

std::string fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

bool canonical_less(const EnvironmentCondition& a, const EnvironmentCondition& b) {
  return fixed_key(a) < fixed_key(b);
}

std::size_t nominal_reference_index(std::span<const EnvironmentCondition> conditions) {
  if (conditions.empty()) throw DomainError("no conditions to pick a reference from");
  auto key = [](const EnvironmentCondition& c) {
    const auto f = to_fixed_point(c);
    return std::make_tuple(std::abs(static_cast<std::int64_t>(f.millivolts) - 5000),
                           std::abs(static_cast<std::int64_t>(f.centi_celsius) - 2000),
                           f.regulator, f.millivolts, f.centi_celsius);
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < conditions.size(); ++i) {
    if (key(conditions[i]) < key(conditions[best])) best = i;
  }
  return best;
}

std::string file_stem(std::uint64_t device_seed, std::size_t block,
                      const EnvironmentCondition& cond) {
  const auto f = to_fixed_point(cond);
  char buf[128];
  std::snprintf(buf, sizeof buf, "dev%016llx_b%zu_T%s%d_V%u_R%u",
                static_cast<unsigned long long>(device_seed), block,
                f.centi_celsius < 0 ? "m" : "", std::abs(f.centi_celsius), f.millivolts,
                static_cast<unsigned>(f.regulator));
  return buf;
}

std::vector<MetricsReport> analyze(std::span<const ResponseSet> sets,
                                   const AnalysisOptions& options) {
  std::vector<const ResponseSet*> order;
  for (const auto& s : sets) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const ResponseSet* a, const ResponseSet* b) {
    if (a->device_seed != b->device_seed) return a->device_seed < b->device_seed;
    return canonical_less(a->condition, b->condition);
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i - 1]->device_seed == order[i]->device_seed &&
        fixed_key(order[i - 1]->condition) == fixed_key(order[i]->condition)) {
      throw DomainError("two response sets share device " +
                        std::to_string(order[i]->device_seed) + " and condition " +
                        order[i]->condition.label());
    }
  }

  std::vector<EnvironmentCondition> distinct;
  for (const auto* s : order) {
    if (std::none_of(distinct.begin(), distinct.end(), [&](const auto& c) {
          return fixed_key(c) == fixed_key(s->condition);
        })) {
      distinct.push_back(s->condition);
    }
  }
  std::optional<EnvironmentCondition> reference = options.reference;
  if (!reference && !distinct.empty()) reference = distinct[nominal_reference_index(distinct)];

  std::map<std::tuple<std::uint8_t, std::int32_t, std::uint32_t>, std::vector<ResponseSet>> by_cond;
  for (const auto* s : order) by_cond[fixed_key(s->condition)].push_back(*s);
  std::map<std::tuple<std::uint8_t, std::int32_t, std::uint32_t>, DistributionSummary> inter;
  for (const auto& [key, group] : by_cond) {
    if (group.size() >= 2) inter[key] = inter_device_hd(group);
  }

  std::vector<MetricsReport> reports;
  for (const auto* s : order) {
    MetricsReport r = build_report(*s, options.bias_threshold);
    if (auto it = inter.find(fixed_key(s->condition)); it != inter.end()) r.inter_hd = it->second;
    if (reference) {
      const auto ref = std::find_if(order.begin(), order.end(), [&](const ResponseSet* o) {
        return o->device_seed == s->device_seed && o->block == s->block &&
               fixed_key(o->condition) == fixed_key(*reference);
      });
      if (ref != order.end()) {
        r.cross_condition_hd = CrossConditionHd{(*ref)->condition, intra_device_hd(**ref, *s)};
      }
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string summary_csv(std::span<const MetricsReport> reports) {
  std::vector<EnvironmentCondition> conditions;
  for (const auto& r : reports) {
    if (std::none_of(conditions.begin(), conditions.end(),
                     [&](const auto& c) { return fixed_key(c) == fixed_key(r.condition); })) {
      conditions.push_back(r.condition);
    }
  }
  std::sort(conditions.begin(), conditions.end(), canonical_less);

  std::ostringstream csv;
  csv << "row_type,condition,temperature_c,supply_voltage_v,regulator,page,devices,trials,fhw,"
         "intra_hd_mean,intra_hd_max,cross_hd_mean,inter_hd_mean,biased_pages,halt_cycle_mean\n";
  for (const auto& cond : conditions) {
    std::vector<const MetricsReport*> group;
    for (const auto& r : reports) {
      if (fixed_key(r.condition) == fixed_key(cond)) group.push_back(&r);
    }
    const std::string prefix = cond.label() + "," + fixed6(cond.temperature_celsius) + "," +
                               fixed6(cond.supply_voltage) + "," +
                               (cond.regulator_enabled ? "1" : "0");
    std::size_t trials = 0;
    for (const auto* r : group) trials += r->trials;

    std::map<std::size_t, std::vector<double>> fhw, intra_mean, intra_max;
    for (const auto* r : group) {
      for (const auto& [page, value] : r->per_instance_fhw) {
        fhw[page].push_back(value);
        const auto& s = r->intra_hd_per_instance.at(page);
        if (s.stats) {
          intra_mean[page].push_back(s.stats->mean);
          intra_max[page].push_back(s.stats->max);
        }
      }
    }
    for (const auto& [page, values] : fhw) {
      std::size_t biased = 0;
      for (const auto* r : group) {
        biased += static_cast<std::size_t>(std::count_if(
            r->bias_flags.begin(), r->bias_flags.end(), [&](const auto& f) { return f.page == page; }));
      }
      csv << "page," << prefix << ',' << page << ',' << group.size() << ',' << trials << ','
          << mean_or_blank(values) << ',' << mean_or_blank(intra_mean[page]) << ','
          << max_or_blank(intra_max[page]) << ",,," << biased << ",\n";
    }

    std::vector<double> overall, pooled_mean, pooled_max, cross, inter_mean, halts;
    std::size_t biased = 0;
    for (const auto* r : group) {
      overall.push_back(r->overall_mean_fhw);
      if (r->intra_hd_pooled.stats) {
        pooled_mean.push_back(r->intra_hd_pooled.stats->mean);
        pooled_max.push_back(r->intra_hd_pooled.stats->max);
      }
      if (r->cross_condition_hd && r->cross_condition_hd->summary.stats) {
        cross.push_back(r->cross_condition_hd->summary.stats->mean);
      }
      if (r->inter_hd && r->inter_hd->stats) inter_mean.push_back(r->inter_hd->stats->mean);
      for (auto h : r->halt_cycles) halts.push_back(static_cast<double>(h));
      biased += r->bias_flags.size();
    }
    // Every report of a condition carries the same inter-device summary.
    if (!inter_mean.empty()) inter_mean.resize(1);
    csv << "summary," << prefix << ",all," << group.size() << ',' << trials << ','
        << mean_or_blank(overall) << ',' << mean_or_blank(pooled_mean) << ','
        << max_or_blank(pooled_max) << ',' << mean_or_blank(cross) << ','
        << mean_or_blank(inter_mean) << ',' << biased << ',' << mean_or_blank(halts) << '\n';
  }
  return csv.str();
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : ""));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& extension) {
  if (fs::is_regular_file(dir)) return {dir};
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

RunOutputs write_reports(std::span<const ResponseSet> sets, const fs::path& out_dir,
                         const AnalysisOptions& options) {
  RunOutputs out;
  const fs::path report_dir = out_dir / "reports";
  ensure_directory(report_dir);
  const auto reports = analyze(sets, options);
  for (const auto& r : reports) {
    const fs::path path = report_dir / (file_stem(r.device_seed, r.block, r.condition) + ".json");
    write_text(path, json_io::to_json(r).dump(2) + "\n");
    out.reports.push_back(path);
  }
  out.summary_csv = out_dir / "summary.csv";
  write_text(out.summary_csv, summary_csv(reports));
  return out;
}

RunOutputs run_plan(const ExperimentPlan& plan, bool verbose) {
  plan.validate();
  ensure_directory(plan.output_dir);
  const fs::path dump_dir = plan.output_dir / "dumps";
  ensure_directory(dump_dir);

  DisturbModelParams params;
  switch (plan.model_source) {
    case ModelSource::calibrated: params = json_io::calibrated_params(); break;
    case ModelSource::explicit_params: params = plan.params; break;
    case ModelSource::calibrate_first: {
      CalibrationSearch search;
      search.geometry = plan.geometry;
      search.hammer = plan.hammer;
      search.threads = plan.threads;
      params = calibrate(CalibrationTargets{}, search, verbose).best.params;
      break;
    }
  }

  std::vector<ResponseSet> sets;
  std::vector<fs::path> dumps;
  for (std::uint64_t seed : plan.device_seeds) {
    const FlashDevice device(plan.geometry, seed);
    for (const auto& cond : plan.conditions) {
      if (verbose) std::cerr << "simulate: seed " << seed << ' ' << cond.label() << '\n';
      sets.push_back(collect_responses(device, plan.block, plan.hammer, params, cond,
                                       plan.trials_per_condition, {plan.threads}));
      const fs::path path = dump_dir / (file_stem(seed, plan.block, cond) + ".fpuf");
      dump::write_file(path, sets.back());
      dumps.push_back(path);
    }
  }

  AnalysisOptions options;
  options.bias_threshold = plan.bias_threshold;
  if (plan.reference_condition) options.reference = plan.conditions[*plan.reference_condition];
  RunOutputs out = write_reports(sets, plan.output_dir, options);
  out.dumps = std::move(dumps);
  out.params = params;
  write_text(plan.output_dir / "params.json", json_io::to_json(params).dump(2) + "\n");
  return out;
}

RunOutputs recompute_metrics(std::span<const fs::path> dumps, const fs::path& out_dir,
                             const AnalysisOptions& options) {
  if (dumps.empty()) throw IoError("no dump files given");
  std::vector<ResponseSet> sets;
  for (const auto& path : dumps) sets.push_back(dump::read_file(path));
  RunOutputs out = write_reports(sets, out_dir, options);
  out.dumps.assign(dumps.begin(), dumps.end());
  return out;
}

}  // namespace flashpuf
