#include "flashpuf/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "flashpuf/errors.hpp"

namespace flashpuf {

namespace {

double interpolate(const std::vector<double>& sorted, double q) {
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

bool same_condition(const ResponseSet& a, const ResponseSet& b) {
  return to_fixed_point(a.condition) == to_fixed_point(b.condition);
}

void require_same_instance(const ResponseSet& a, const ResponseSet& b) {
  if (a.device_seed != b.device_seed || a.block != b.block) {
    throw DomainError("intra-device HD needs responses of the same device and block");
  }
  if (a.geometry != b.geometry) throw DomainError("response sets differ in geometry");
}

template <typename Visit>
void for_each_intra_pair(const ResponseSet& a, const ResponseSet& b, Visit&& visit) {
  require_same_instance(a, b);
  const bool same = same_condition(a, b);
  for (std::size_t page : victim_pages(a.geometry)) {
    for (std::size_t ta = 0; ta < a.trials_per_condition; ++ta) {
      for (std::size_t tb = same ? ta + 1 : 0; tb < b.trials_per_condition; ++tb) {
        visit(page, fractional_hamming_distance(a.at(ta, page).payload, b.at(tb, page).payload));
      }
    }
  }
}

}  // namespace

DistributionSummary summarize(std::vector<double> values) {
  DistributionSummary out;
  out.count = values.size();
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  SummaryStats s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.p01 = interpolate(values, 0.01);
  s.p25 = interpolate(values, 0.25);
  s.p50 = interpolate(values, 0.50);
  s.p75 = interpolate(values, 0.75);
  s.p99 = interpolate(values, 0.99);
  out.stats = s;
  return out;
}

std::size_t popcount(std::span<const std::uint8_t> bytes) noexcept {
  std::size_t total = 0;
  std::size_t i = 0;
  for (; i + 8 <= bytes.size(); i += 8) {
    std::uint64_t word;
    std::memcpy(&word, bytes.data() + i, 8);
    total += static_cast<std::size_t>(std::popcount(word));
  }
  for (; i < bytes.size(); ++i) total += static_cast<std::size_t>(std::popcount(bytes[i]));
  return total;
}

std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw DomainError("Hamming distance of unequal lengths");
  std::size_t total = 0;
  std::size_t i = 0;
  for (; i + 8 <= a.size(); i += 8) {
    std::uint64_t wa, wb;
    std::memcpy(&wa, a.data() + i, 8);
    std::memcpy(&wb, b.data() + i, 8);
    total += static_cast<std::size_t>(std::popcount(wa ^ wb));
  }
  for (; i < a.size(); ++i) {
    total += static_cast<std::size_t>(std::popcount(static_cast<std::uint8_t>(a[i] ^ b[i])));
  }
  return total;
}

double fractional_hamming_weight(std::span<const std::uint8_t> bits) {
  if (bits.empty()) throw DomainError("fractional Hamming weight of empty input");
  return static_cast<double>(popcount(bits)) / (8.0 * static_cast<double>(bits.size()));
}

double fractional_hamming_distance(std::span<const std::uint8_t> a,
                                   std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw DomainError("fractional Hamming distance of unequal lengths");
  if (a.empty()) throw DomainError("fractional Hamming distance of empty input");
  return static_cast<double>(hamming_distance(a, b)) / (8.0 * static_cast<double>(a.size()));
}

double overall_mean_fhw(const ResponseSet& set) {
  if (set.responses.empty()) throw DomainError("overall FHW of an empty response set");
  double sum = 0.0;
  for (const auto& r : set.responses) sum += fractional_hamming_weight(r.payload);
  return sum / static_cast<double>(set.responses.size());
}

std::map<std::size_t, double> per_instance_fhw(const ResponseSet& set) {
  if (set.responses.empty()) throw DomainError("per-instance FHW of an empty response set");
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : set.responses) {
    auto& [sum, n] = acc[r.page];
    sum += fractional_hamming_weight(r.payload);
    ++n;
  }
  std::map<std::size_t, double> out;
  for (const auto& [page, entry] : acc) out[page] = entry.first / static_cast<double>(entry.second);
  return out;
}

std::vector<BiasFlag> bias_flags(const std::map<std::size_t, double>& per_instance,
                                 double threshold) {
  std::vector<BiasFlag> flags;
  for (const auto& [page, fhw] : per_instance) {
    if (std::abs(fhw - 0.5) > threshold) {
      flags.push_back({page, fhw < 0.5 ? BiasDirection::toward_zero : BiasDirection::toward_one,
                       fhw});
    }
  }
  return flags;
}

DistributionSummary intra_device_hd(const ResponseSet& set_a, const ResponseSet& set_b) {
  std::vector<double> distances;
  for_each_intra_pair(set_a, set_b, [&](std::size_t, double d) { distances.push_back(d); });
  return summarize(std::move(distances));
}

std::map<std::size_t, DistributionSummary> intra_device_hd_per_page(const ResponseSet& set_a,
                                                                   const ResponseSet& set_b) {
  std::map<std::size_t, std::vector<double>> by_page;
  for (std::size_t page : victim_pages(set_a.geometry)) by_page[page];
  for_each_intra_pair(set_a, set_b,
                      [&](std::size_t page, double d) { by_page[page].push_back(d); });
  std::map<std::size_t, DistributionSummary> out;
  for (auto& [page, values] : by_page) out[page] = summarize(std::move(values));
  return out;
}

DistributionSummary intra_device_hd_vs_reference(const ResponseSet& set,
                                                 std::size_t reference_trial) {
  if (reference_trial >= set.trials_per_condition) {
    throw DomainError("reference trial out of range");
  }
  std::vector<double> distances;
  for (std::size_t page : victim_pages(set.geometry)) {
    const auto& reference = set.at(reference_trial, page).payload;
    for (std::size_t t = 0; t < set.trials_per_condition; ++t) {
      if (t == reference_trial) continue;
      distances.push_back(fractional_hamming_distance(reference, set.at(t, page).payload));
    }
  }
  return summarize(std::move(distances));
}

DistributionSummary inter_device_hd(std::span<const ResponseSet> sets) {
  if (sets.size() < 2) throw DomainError("inter-device HD needs at least two devices");
  std::set<std::uint64_t> seeds;
  for (const auto& s : sets) {
    if (!seeds.insert(s.device_seed).second) {
      throw DomainError("inter-device HD given the same device twice");
    }
    if (s.geometry != sets[0].geometry) throw DomainError("response sets differ in geometry");
  }
  std::vector<double> distances;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      for (std::size_t page : victim_pages(sets[i].geometry)) {
        for (std::size_t ti = 0; ti < sets[i].trials_per_condition; ++ti) {
          for (std::size_t tj = 0; tj < sets[j].trials_per_condition; ++tj) {
            distances.push_back(fractional_hamming_distance(sets[i].at(ti, page).payload,
                                                            sets[j].at(tj, page).payload));
          }
        }
      }
    }
  }
  return summarize(std::move(distances));
}

std::vector<double> bit_stability_map(const ResponseSet& set) {
  if (set.trials_per_condition < 2) throw DomainError("bit stability needs at least two trials");
  const auto pages = victim_pages(set.geometry);
  const std::size_t bits = set.geometry.bits_per_page();
  std::vector<std::uint32_t> zeros(pages.size() * bits, 0);
  for (std::size_t t = 0; t < set.trials_per_condition; ++t) {
    for (std::size_t i = 0; i < pages.size(); ++i) {
      const auto& payload = set.at(t, pages[i]).payload;
      for (std::size_t cell = 0; cell < bits; ++cell) {
        if (!cell_value(payload, cell)) ++zeros[i * bits + cell];
      }
    }
  }
  std::vector<double> freq(zeros.size());
  const double trials = static_cast<double>(set.trials_per_condition);
  std::transform(zeros.begin(), zeros.end(), freq.begin(),
                 [trials](std::uint32_t z) { return z / trials; });
  return freq;
}

MetricsReport build_report(const ResponseSet& set, double bias_threshold) {
  set.check_complete();
  MetricsReport report;
  report.device_seed = set.device_seed;
  report.block = set.block;
  report.condition = set.condition;
  report.condition_label = set.condition.label();
  report.trials = set.trials_per_condition;
  for (std::size_t t = 0; t < set.trials_per_condition; ++t) {
    report.halt_cycles.push_back(set.halt_cycle(t));
  }
  report.overall_mean_fhw = overall_mean_fhw(set);
  report.per_instance_fhw = per_instance_fhw(set);
  report.intra_hd_per_instance = intra_device_hd_per_page(set, set);
  report.intra_hd_pooled = intra_device_hd(set, set);
  report.bias_threshold = bias_threshold;
  report.bias_flags = bias_flags(report.per_instance_fhw, bias_threshold);
  return report;
}

}  // namespace flashpuf
