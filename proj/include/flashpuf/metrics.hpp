#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flashpuf/protocol.hpp"

namespace flashpuf {

// Percentiles use linear interpolation between order statistics.
struct SummaryStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double p01 = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double p99 = 0.0;

  bool operator==(const SummaryStats&) const = default;
};

// `stats` is empty when there was nothing to summarize (e.g. a single trial
// has no distinct pairs).
struct DistributionSummary {
  std::size_t count = 0;
  std::optional<SummaryStats> stats;

  bool empty() const noexcept { return count == 0; }
  bool operator==(const DistributionSummary&) const = default;
};

DistributionSummary summarize(std::vector<double> values);

enum class BiasDirection { toward_zero, toward_one };

struct BiasFlag {
  std::size_t page = 0;
  BiasDirection direction = BiasDirection::toward_zero;
  double fhw = 0.0;

  bool operator==(const BiasFlag&) const = default;
};

inline constexpr double kDefaultBiasThreshold = 0.15;

std::size_t popcount(std::span<const std::uint8_t> bytes) noexcept;
std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

double fractional_hamming_weight(std::span<const std::uint8_t> bits);
double fractional_hamming_distance(std::span<const std::uint8_t> a,
                                   std::span<const std::uint8_t> b);

double overall_mean_fhw(const ResponseSet& set);
std::map<std::size_t, double> per_instance_fhw(const ResponseSet& set);

std::vector<BiasFlag> bias_flags(const std::map<std::size_t, double>& per_instance,
                                 double threshold = kDefaultBiasThreshold);

// Same-page fractional HDs between two measurements of one (device, block).
// Sets with equal conditions are treated as one measurement: only unordered
// pairs of distinct trials count. Otherwise every cross pair counts.
DistributionSummary intra_device_hd(const ResponseSet& set_a, const ResponseSet& set_b);
std::map<std::size_t, DistributionSummary> intra_device_hd_per_page(const ResponseSet& set_a,
                                                                   const ResponseSet& set_b);

// Distances of every trial to one reference (enrollment) trial.
DistributionSummary intra_device_hd_vs_reference(const ResponseSet& set,
                                                 std::size_t reference_trial = 0);

// Same-page fractional HDs across every pair of distinct devices, all trial
// combinations. Needs at least two sets with distinct device seeds.
DistributionSummary inter_device_hd(std::span<const ResponseSet> sets);

// Per victim-page bit (page-ascending, then cell order), fraction of trials in
// which it read 0.
std::vector<double> bit_stability_map(const ResponseSet& set);

struct CrossConditionHd {
  EnvironmentCondition reference;
  DistributionSummary summary;

  bool operator==(const CrossConditionHd&) const = default;
};

struct MetricsReport {
  std::uint64_t device_seed = 0;
  std::size_t block = 0;
  EnvironmentCondition condition;
  std::string condition_label;
  std::size_t trials = 0;
  std::vector<std::uint64_t> halt_cycles;
  double overall_mean_fhw = 0.0;
  std::map<std::size_t, double> per_instance_fhw;
  std::map<std::size_t, DistributionSummary> intra_hd_per_instance;
  DistributionSummary intra_hd_pooled;
  std::optional<DistributionSummary> inter_hd;
  std::optional<CrossConditionHd> cross_condition_hd;
  double bias_threshold = kDefaultBiasThreshold;
  std::vector<BiasFlag> bias_flags;

  bool operator==(const MetricsReport&) const = default;
};

// Single-measurement report; inter_hd and cross_condition_hd are left for
// the caller, who knows the other measurements.
MetricsReport build_report(const ResponseSet& set, double bias_threshold = kDefaultBiasThreshold);

}  // namespace flashpuf
