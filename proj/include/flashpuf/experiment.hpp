#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flashpuf/disturb.hpp"
#include "flashpuf/metrics.hpp"
#include "flashpuf/plan.hpp"
#include "flashpuf/protocol.hpp"

namespace flashpuf {

struct AnalysisOptions {
  // Condition every other measurement of a device is compared against for
  // cross-condition intra-device HD. Defaults to the one nearest nominal.
  std::optional<EnvironmentCondition> reference;
  double bias_threshold = kDefaultBiasThreshold;
};

// Index of the condition closest to 5.0 V / 20 degC, preferring the
// unregulated one; independent of list order.
std::size_t nominal_reference_index(std::span<const EnvironmentCondition> conditions);

// Ascending by (regulator, temperature, voltage) in fixed-point units.
bool canonical_less(const EnvironmentCondition& a, const EnvironmentCondition& b);

// One report per set, sorted by (device seed, canonical condition). Fills
// cross-condition HD against the reference and inter-device HD between all
// devices measured at the same condition.
std::vector<MetricsReport> analyze(std::span<const ResponseSet> sets, const AnalysisOptions& options);

// One row per (condition, page) followed by a summary row per condition.
std::string summary_csv(std::span<const MetricsReport> reports);

std::string file_stem(std::uint64_t device_seed, std::size_t block, const EnvironmentCondition& cond);

// Six decimal places; the only float format used in emitted CSV.
std::string fixed6(double value);

struct RunOutputs {
  std::vector<std::filesystem::path> dumps;
  std::vector<std::filesystem::path> reports;
  std::filesystem::path summary_csv;
  DisturbModelParams params;
};

// Simulates every (seed, condition) of the plan and writes
//   <out>/dumps/<stem>.fpuf, <out>/reports/<stem>.json, <out>/summary.csv,
//   <out>/params.json.
RunOutputs run_plan(const ExperimentPlan& plan, bool verbose = false);

// Writes reports and summary for already collected sets.
RunOutputs write_reports(std::span<const ResponseSet> sets, const std::filesystem::path& out_dir,
                         const AnalysisOptions& options);

// Reads FPUF dumps and writes reports/summary as run_plan would have.
RunOutputs recompute_metrics(std::span<const std::filesystem::path> dumps,
                             const std::filesystem::path& out_dir, const AnalysisOptions& options);

// Regular files under `dir` (or `dir` itself) with the extension, sorted.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              const std::string& extension);

void ensure_directory(const std::filesystem::path& dir);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace flashpuf
