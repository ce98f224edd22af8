#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flashpuf/disturb.hpp"
#include "flashpuf/flash_device.hpp"

namespace flashpuf {

// Which victim pages must satisfy the disturbed-address threshold before
// hammering stops.
enum class StopScope { all_victims, any_victim };

// Aggressor pages are the even page indices of a block, victims the odd ones.
// Interior victims sit between two aggressors; the last page of the block has
// a single aggressor neighbour.
struct HammerConfig {
  std::uint64_t max_cycles = 10000;
  std::size_t min_disturbed_addresses = 2040;
  std::uint8_t program_pattern = 0x00;
  StopScope stop_scope = StopScope::all_victims;

  void validate(const FlashGeometry& geometry) const;

  bool operator==(const HammerConfig&) const = default;
};

std::vector<std::size_t> aggressor_pages(const FlashGeometry& geometry);
std::vector<std::size_t> victim_pages(const FlashGeometry& geometry);
bool is_victim_page(const FlashGeometry& geometry, std::size_t page) noexcept;

// Disturb exposures a victim page receives per hammer cycle (1 or 2).
std::uint64_t exposures_per_cycle(const FlashGeometry& geometry, std::size_t victim_page);

struct PufResponse {
  std::uint64_t device_seed = 0;
  std::size_t block = 0;
  std::size_t page = 0;
  std::size_t trial = 0;
  EnvironmentCondition condition;
  std::uint64_t halt_cycle = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const PufResponse&) const = default;
};

// All responses of one (device, block, condition) measurement, stored
// trial-major with victim pages ascending inside each trial.
struct ResponseSet {
  std::uint64_t device_seed = 0;
  std::size_t block = 0;
  EnvironmentCondition condition;
  FlashGeometry geometry;
  std::size_t trials_per_condition = 0;
  std::vector<PufResponse> responses;

  std::size_t victims_per_trial() const noexcept { return geometry.pages_per_block / 2; }
  std::size_t payload_bytes() const noexcept;

  // Throws IncompleteSetError if the (trial, page) response is absent.
  const PufResponse& at(std::size_t trial, std::size_t page) const;
  std::uint64_t halt_cycle(std::size_t trial) const;

  // Throws IncompleteSetError unless every trial holds every victim page.
  void check_complete() const;

  bool operator==(const ResponseSet&) const = default;
};

struct ExecutionOptions {
  unsigned threads = 1;
};

// Erases the block, then runs hammer cycles until the stop predicate holds
// after a cycle or max_cycles is reached. Returns the halt cycle.
std::uint64_t hammer_block(FlashDevice& device, std::size_t block, const HammerConfig& cfg,
                           const DisturbModelParams& params, const EnvironmentCondition& cond,
                           std::size_t trial);

// Bytes of the page that differ from 0xFF.
std::size_t disturbed_address_count(const FlashDevice& device, PageAddress victim);

PufResponse extract_response(const FlashDevice& device, std::size_t block, std::size_t page,
                             std::size_t trial, const EnvironmentCondition& cond,
                             std::uint64_t halt_cycle);

// Runs `trials` independent erase/hammer/read trials. Each trial uses its own
// copy of `device`; the result does not depend on `exec.threads`.
ResponseSet collect_responses(const FlashDevice& device, std::size_t block,
                              const HammerConfig& cfg, const DisturbModelParams& params,
                              const EnvironmentCondition& cond, std::size_t trials = 20,
                              ExecutionOptions exec = {});

// Victim payloads of one trial concatenated in ascending page order.
std::vector<std::uint8_t> block_response(const ResponseSet& set, std::size_t trial);

}  // namespace flashpuf
