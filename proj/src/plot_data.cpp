#include "flashpuf/plot_data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <vector>

#include "flashpuf/errors.hpp"
#include "flashpuf/experiment.hpp"
#include "flashpuf/json_io.hpp"

namespace flashpuf {

namespace fs = std::filesystem;

namespace {

// The emitted voltage axis is the simulator's own sweep, not measured values.
constexpr const char* kVoltageGrid = "simulator-chosen";

MetricsReport load_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return json_io::report_from_json(j, path.filename().string());
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

PlotDataFiles emit_plot_data(std::span<const fs::path> report_files, const fs::path& out_dir) {
  if (report_files.empty()) throw IoError("no report files given");
  std::vector<MetricsReport> reports;
  for (const auto& path : report_files) reports.push_back(load_report(path));

  EnvironmentCondition reference;
  const auto with_ref = std::find_if(reports.begin(), reports.end(),
                                     [](const auto& r) { return r.cross_condition_hd.has_value(); });
  if (with_ref != reports.end()) {
    reference = with_ref->cross_condition_hd->reference;
  } else {
    std::vector<EnvironmentCondition> conditions;
    for (const auto& r : reports) conditions.push_back(r.condition);
    reference = conditions[nominal_reference_index(conditions)];
  }
  const auto ref_fixed = to_fixed_point(reference);

  // Temperature series: reports at the reference supply setting.
  std::map<std::int32_t, std::vector<const MetricsReport*>> by_temperature;
  // Voltage series: reports at the reference temperature.
  std::map<std::tuple<std::uint8_t, std::uint32_t>, std::vector<const MetricsReport*>> by_voltage;
  for (const auto& r : reports) {
    const auto f = to_fixed_point(r.condition);
    if (f.millivolts == ref_fixed.millivolts && f.regulator == ref_fixed.regulator) {
      by_temperature[f.centi_celsius].push_back(&r);
    }
    if (f.centi_celsius == ref_fixed.centi_celsius) {
      by_voltage[{f.regulator, f.millivolts}].push_back(&r);
    }
  }

  std::ostringstream fig2, fig3, fig4, fig5;
  fig2 << "temperature_c,devices,overall_fhw_mean,overall_fhw_min,overall_fhw_max\n";
  fig3 << "temperature_c,page,devices,fhw_mean\n";
  for (const auto& [centi, group] : by_temperature) {
    std::vector<double> overall;
    std::map<std::size_t, std::vector<double>> pages;
    for (const auto* r : group) {
      overall.push_back(r->overall_mean_fhw);
      for (const auto& [page, fhw] : r->per_instance_fhw) pages[page].push_back(fhw);
    }
    const std::string temp = fixed6(centi / 100.0);
    fig2 << temp << ',' << group.size() << ',' << fixed6(mean(overall)) << ','
         << fixed6(*std::min_element(overall.begin(), overall.end())) << ','
         << fixed6(*std::max_element(overall.begin(), overall.end())) << '\n';
    for (const auto& [page, values] : pages) {
      fig3 << temp << ',' << page << ',' << values.size() << ',' << fixed6(mean(values)) << '\n';
    }
  }

  fig4 << "supply_voltage_v,regulator,devices,overall_fhw_mean,overall_fhw_min,overall_fhw_max,"
          "voltage_grid\n";
  fig5 << "reference_voltage_v,supply_voltage_v,regulator,devices,intra_hd_mean,intra_hd_p01,"
          "intra_hd_p25,intra_hd_p50,intra_hd_p75,intra_hd_p99,intra_hd_max,voltage_grid\n";
  for (const auto& [key, group] : by_voltage) {
    const auto& [regulator, millivolts] = key;
    const std::string volt = fixed6(millivolts / 1000.0);
    std::vector<double> overall;
    std::vector<SummaryStats> cross;
    for (const auto* r : group) {
      overall.push_back(r->overall_mean_fhw);
      if (r->cross_condition_hd && r->cross_condition_hd->summary.stats) {
        cross.push_back(*r->cross_condition_hd->summary.stats);
      }
    }
    fig4 << volt << ',' << unsigned{regulator} << ',' << group.size() << ','
         << fixed6(mean(overall)) << ',' << fixed6(*std::min_element(overall.begin(), overall.end()))
         << ',' << fixed6(*std::max_element(overall.begin(), overall.end())) << ',' << kVoltageGrid
         << '\n';
    if (cross.empty()) continue;
    auto avg = [&](double SummaryStats::*field) {
      double s = 0.0;
      for (const auto& c : cross) s += c.*field;
      return fixed6(s / static_cast<double>(cross.size()));
    };
    double worst = 0.0;
    for (const auto& c : cross) worst = std::max(worst, c.max);
    fig5 << fixed6(reference.supply_voltage) << ',' << volt << ',' << unsigned{regulator} << ','
         << cross.size() << ',' << avg(&SummaryStats::mean) << ',' << avg(&SummaryStats::p01) << ','
         << avg(&SummaryStats::p25) << ',' << avg(&SummaryStats::p50) << ','
         << avg(&SummaryStats::p75) << ',' << avg(&SummaryStats::p99) << ',' << fixed6(worst) << ','
         << kVoltageGrid << '\n';
  }

  ensure_directory(out_dir);
  PlotDataFiles files{out_dir / "temperature_fhw.csv", out_dir / "temperature_page_fhw.csv",
                      out_dir / "voltage_fhw.csv", out_dir / "voltage_intra_hd.csv"};
  write_text(files.temperature_fhw, fig2.str());
  write_text(files.temperature_page_fhw, fig3.str());
  write_text(files.voltage_fhw, fig4.str());
  write_text(files.voltage_intra_hd, fig5.str());
  return files;
}

}  // namespace flashpuf
