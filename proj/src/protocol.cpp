#include "flashpuf/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <string>
#include <thread>

#include "flashpuf/errors.hpp"

namespace flashpuf {

void HammerConfig::validate(const FlashGeometry& geometry) const {
  geometry.validate();
  if (max_cycles == 0) throw ConfigError("hammer.max_cycles", "must be >= 1");
  if (min_disturbed_addresses > geometry.bytes_per_page) {
    throw ConfigError("hammer.min_disturbed_addresses",
                      "exceeds bytes_per_page (" + std::to_string(geometry.bytes_per_page) + ")");
  }
}

std::vector<std::size_t> aggressor_pages(const FlashGeometry& geometry) {
  std::vector<std::size_t> pages;
  for (std::size_t p = 0; p < geometry.pages_per_block; p += 2) pages.push_back(p);
  return pages;
}

std::vector<std::size_t> victim_pages(const FlashGeometry& geometry) {
  std::vector<std::size_t> pages;
  for (std::size_t p = 1; p < geometry.pages_per_block; p += 2) pages.push_back(p);
  return pages;
}

bool is_victim_page(const FlashGeometry& geometry, std::size_t page) noexcept {
  return page < geometry.pages_per_block && page % 2 == 1;
}

std::uint64_t exposures_per_cycle(const FlashGeometry& geometry, std::size_t victim_page) {
  if (!is_victim_page(geometry, victim_page)) {
    throw ProtocolError("page " + std::to_string(victim_page) + " is not a victim page");
  }
  // The page below is always an aggressor; the one above only if it exists.
  return victim_page + 1 < geometry.pages_per_block ? 2 : 1;
}

std::size_t ResponseSet::payload_bytes() const noexcept {
  std::size_t total = 0;
  for (const auto& r : responses) total += r.payload.size();
  return total;
}

const PufResponse& ResponseSet::at(std::size_t trial, std::size_t page) const {
  const std::size_t per_trial = victims_per_trial();
  const std::size_t slot = trial * per_trial + page / 2;
  if (page % 2 == 1 && page < geometry.pages_per_block && slot < responses.size()) {
    const auto& r = responses[slot];
    if (r.trial == trial && r.page == page) return r;
  }
  for (const auto& r : responses) {
    if (r.trial == trial && r.page == page) return r;
  }
  throw IncompleteSetError("no response for trial " + std::to_string(trial) + ", page " +
                           std::to_string(page));
}

std::uint64_t ResponseSet::halt_cycle(std::size_t trial) const { return at(trial, 1).halt_cycle; }

void ResponseSet::check_complete() const {
  if (responses.size() != trials_per_condition * victims_per_trial()) {
    throw IncompleteSetError("response set holds " + std::to_string(responses.size()) +
                             " responses, expected " +
                             std::to_string(trials_per_condition * victims_per_trial()));
  }
  for (std::size_t t = 0; t < trials_per_condition; ++t) {
    for (std::size_t page : victim_pages(geometry)) {
      if (at(t, page).payload.size() != geometry.bytes_per_page) {
        throw IncompleteSetError("payload of trial " + std::to_string(t) + ", page " +
                                 std::to_string(page) + " has wrong length");
      }
    }
  }
}

namespace {

constexpr std::uint64_t kNeverReady = kNeverFlips;

// Per-victim flip probabilities for one (device, block, params, condition);
// shared by all trials of a measurement.
struct VictimField {
  std::vector<std::size_t> pages;
  std::vector<std::vector<double>> probabilities;
};

VictimField build_field(const FlashDevice& device, std::size_t block,
                        const DisturbModelParams& params, const EnvironmentCondition& cond) {
  VictimField field;
  field.pages = victim_pages(device.geometry());
  const DeviceIdentity identity(device.device_seed());
  for (std::size_t page : field.pages) {
    field.probabilities.push_back(
        page_flip_probabilities(identity, device.geometry(), {block, page}, params, cond));
  }
  return field;
}

// First cycle after which at least `threshold` bytes of the page hold a flip.
std::uint64_t ready_cycle(std::span<const std::uint64_t> flip_exposures, std::size_t bytes,
                          std::uint64_t per_cycle, std::size_t threshold) {
  if (threshold == 0) return 1;
  std::vector<std::uint64_t> byte_cycle(bytes, kNeverReady);
  for (std::size_t cell = 0; cell < flip_exposures.size(); ++cell) {
    const std::uint64_t e = flip_exposures[cell];
    if (e == kNeverFlips) continue;
    const std::uint64_t cycle = (e + per_cycle - 1) / per_cycle;
    auto& slot = byte_cycle[cell / 8];
    slot = std::min(slot, cycle);
  }
  auto nth = byte_cycle.begin() + static_cast<std::ptrdiff_t>(threshold - 1);
  std::nth_element(byte_cycle.begin(), nth, byte_cycle.end());
  return *nth;
}

std::uint64_t run_hammer(FlashDevice& device, std::size_t block, const HammerConfig& cfg,
                         const VictimField& field, const TrialNoise& noise) {
  const auto& geometry = device.geometry();
  device.erase_block(block);

  std::vector<std::vector<std::uint64_t>> exposures;
  exposures.reserve(field.pages.size());
  const bool all = cfg.stop_scope == StopScope::all_victims;
  std::uint64_t halt = all ? 0 : kNeverReady;
  for (std::size_t i = 0; i < field.pages.size(); ++i) {
    const std::size_t page = field.pages[i];
    exposures.push_back(
        page_flip_exposures(field.probabilities[i], geometry, {block, page}, noise));
    const std::uint64_t ready =
        ready_cycle(exposures.back(), geometry.bytes_per_page, exposures_per_cycle(geometry, page),
                    cfg.min_disturbed_addresses);
    halt = all ? std::max(halt, ready) : std::min(halt, ready);
  }
  halt = std::clamp<std::uint64_t>(halt, 1, cfg.max_cycles);

  // Every cycle programs each aggressor once (ascending); repeated programs of
  // the same pattern leave the aggressor content unchanged after the first.
  const std::vector<std::uint8_t> pattern(geometry.bytes_per_page, cfg.program_pattern);
  for (std::size_t page : aggressor_pages(geometry)) {
    device.program_page({block, page}, pattern, halt);
  }
  for (std::size_t i = 0; i < field.pages.size(); ++i) {
    const std::size_t page = field.pages[i];
    apply_sampled_exposures(device, {block, page}, exposures[i],
                            halt * exposures_per_cycle(geometry, page));
  }
  return halt;
}

}  // namespace

std::uint64_t hammer_block(FlashDevice& device, std::size_t block, const HammerConfig& cfg,
                           const DisturbModelParams& params, const EnvironmentCondition& cond,
                           std::size_t trial) {
  cfg.validate(device.geometry());
  params.validate();
  cond.validate();
  if (block >= device.geometry().blocks_per_device) {
    throw AddressError("block " + std::to_string(block) + " out of range");
  }
  const auto field = build_field(device, block, params, cond);
  return run_hammer(device, block, cfg, field,
                    TrialNoise::derive(device.device_seed(), block, trial, cond));
}

std::size_t disturbed_address_count(const FlashDevice& device, PageAddress victim) {
  const auto page = device.page_view(victim);
  return static_cast<std::size_t>(
      std::count_if(page.begin(), page.end(), [](std::uint8_t b) { return b != 0xFF; }));
}

PufResponse extract_response(const FlashDevice& device, std::size_t block, std::size_t page,
                             std::size_t trial, const EnvironmentCondition& cond,
                             std::uint64_t halt_cycle) {
  auto payload = device.read_page({block, page});
  if (!is_victim_page(device.geometry(), page)) {
    throw ProtocolError("page " + std::to_string(page) + " is not a victim page");
  }
  return {device.device_seed(), block, page, trial, cond, halt_cycle, std::move(payload)};
}

ResponseSet collect_responses(const FlashDevice& device, std::size_t block,
                              const HammerConfig& cfg, const DisturbModelParams& params,
                              const EnvironmentCondition& cond, std::size_t trials,
                              ExecutionOptions exec) {
  const auto& geometry = device.geometry();
  cfg.validate(geometry);
  params.validate();
  cond.validate();
  if (block >= geometry.blocks_per_device) {
    throw AddressError("block " + std::to_string(block) + " out of range");
  }

  ResponseSet set;
  set.device_seed = device.device_seed();
  set.block = block;
  set.condition = cond;
  set.geometry = geometry;
  set.trials_per_condition = trials;
  const std::size_t per_trial = set.victims_per_trial();
  set.responses.resize(trials * per_trial);

  const auto field = build_field(device, block, params, cond);
  auto run_trial = [&](std::size_t trial) {
    FlashDevice scratch = device;
    const auto noise = TrialNoise::derive(device.device_seed(), block, trial, cond);
    const std::uint64_t halt = run_hammer(scratch, block, cfg, field, noise);
    for (std::size_t i = 0; i < per_trial; ++i) {
      set.responses[trial * per_trial + i] =
          extract_response(scratch, block, field.pages[i], trial, cond, halt);
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(exec.threads, static_cast<unsigned>(trials)));
  if (workers <= 1) {
    for (std::size_t t = 0; t < trials; ++t) run_trial(t);
    return set;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = next++; t < trials; t = next++) run_trial(t);
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return set;
}

std::vector<std::uint8_t> block_response(const ResponseSet& set, std::size_t trial) {
  std::vector<std::uint8_t> out;
  out.reserve(set.victims_per_trial() * set.geometry.bytes_per_page);
  for (std::size_t page : victim_pages(set.geometry)) {
    const auto& payload = set.at(trial, page).payload;
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

}  // namespace flashpuf
