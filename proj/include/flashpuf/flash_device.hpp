#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flashpuf {

// Cell order convention used throughout (device, dumps, metrics, keyforge):
// cell i of a page lives in byte i / 8 at bit position 7 - (i % 8), i.e. the
// most significant bit of a byte is its lowest-indexed cell.
constexpr std::uint8_t cell_mask(std::size_t cell) noexcept {
  return static_cast<std::uint8_t>(0x80u >> (cell % 8));
}

constexpr bool cell_value(std::span<const std::uint8_t> bytes, std::size_t cell) noexcept {
  return (bytes[cell / 8] & cell_mask(cell)) != 0;
}

struct FlashGeometry {
  std::size_t pages_per_block = 64;
  std::size_t bytes_per_page = 2048;
  std::size_t blocks_per_device = 1;

  // Throws ConfigError unless pages_per_block is even and >= 4 and the other
  // dimensions are non-zero.
  void validate() const;

  std::size_t bits_per_page() const noexcept { return bytes_per_page * 8; }
  std::size_t bytes_per_block() const noexcept { return bytes_per_page * pages_per_block; }

  bool operator==(const FlashGeometry&) const = default;
};

struct PageAddress {
  std::size_t block = 0;
  std::size_t page = 0;

  bool operator==(const PageAddress&) const = default;
};

// Behavioral SLC NAND model. Erase sets a block to all ones, programming can
// only clear bits, reads never change state. Alongside cell contents the
// device keeps per-page disturbance bookkeeping (program events issued to the
// page, disturb exposures delivered to it); erase_block resets both.
//
// Single writer: callers serialize mutation of one instance. Copies are
// independent and may be driven from different threads.
class FlashDevice {
 public:
  FlashDevice(FlashGeometry geometry, std::uint64_t device_seed);

  const FlashGeometry& geometry() const noexcept { return geometry_; }
  std::uint64_t device_seed() const noexcept { return device_seed_; }

  void erase_block(std::size_t block);

  // Stores old AND data. `repeat` issues the same program command that many
  // times; the result equals a single program, but each one is counted as a
  // program event.
  void program_page(PageAddress addr, std::span<const std::uint8_t> data,
                    std::uint64_t repeat = 1);

  std::vector<std::uint8_t> read_page(PageAddress addr) const;

  // Zero-copy view of the page contents; invalidated by any mutation.
  std::span<const std::uint8_t> page_view(PageAddress addr) const;

  // Clears one cell (1 -> 0). Used by the disturb engine; a cell already at 0
  // stays 0. Returns true if the cell changed.
  bool disturb_cell(PageAddress addr, std::size_t cell);

  std::uint64_t program_events(PageAddress addr) const;
  std::uint64_t exposures(PageAddress addr) const;
  void record_exposures(PageAddress addr, std::uint64_t count);

  bool operator==(const FlashDevice&) const = default;

 private:
  std::size_t page_slot(PageAddress addr) const;
  std::span<std::uint8_t> page_bytes(PageAddress addr);

  FlashGeometry geometry_;
  std::uint64_t device_seed_;
  std::vector<std::uint8_t> cells_;
  std::vector<std::uint64_t> program_events_;
  std::vector<std::uint64_t> exposures_;
};

}  // namespace flashpuf
