#include "flashpuf/flash_device.hpp"

#include <algorithm>
#include <string>

#include "flashpuf/errors.hpp"

namespace flashpuf {

void FlashGeometry::validate() const {
  if (pages_per_block < 4 || pages_per_block % 2 != 0) {
    throw ConfigError("geometry.pages_per_block",
                      "must be even and >= 4, got " + std::to_string(pages_per_block));
  }
  if (bytes_per_page == 0) throw ConfigError("geometry.bytes_per_page", "must be > 0");
  if (blocks_per_device == 0) throw ConfigError("geometry.blocks_per_device", "must be >= 1");
}

FlashDevice::FlashDevice(FlashGeometry geometry, std::uint64_t device_seed)
    : geometry_(geometry), device_seed_(device_seed) {
  geometry_.validate();
  const std::size_t pages = geometry_.pages_per_block * geometry_.blocks_per_device;
  cells_.assign(pages * geometry_.bytes_per_page, 0xFF);
  program_events_.assign(pages, 0);
  exposures_.assign(pages, 0);
}

std::size_t FlashDevice::page_slot(PageAddress addr) const {
  if (addr.block >= geometry_.blocks_per_device) {
    throw AddressError("block " + std::to_string(addr.block) + " out of range (device has " +
                       std::to_string(geometry_.blocks_per_device) + ")");
  }
  if (addr.page >= geometry_.pages_per_block) {
    throw AddressError("page " + std::to_string(addr.page) + " out of range (block has " +
                       std::to_string(geometry_.pages_per_block) + ")");
  }
  return addr.block * geometry_.pages_per_block + addr.page;
}

std::span<std::uint8_t> FlashDevice::page_bytes(PageAddress addr) {
  const std::size_t slot = page_slot(addr);
  return {cells_.data() + slot * geometry_.bytes_per_page, geometry_.bytes_per_page};
}

void FlashDevice::erase_block(std::size_t block) {
  if (block >= geometry_.blocks_per_device) {
    throw AddressError("block " + std::to_string(block) + " out of range (device has " +
                       std::to_string(geometry_.blocks_per_device) + ")");
  }
  const std::size_t first = block * geometry_.pages_per_block;
  auto begin = cells_.begin() + static_cast<std::ptrdiff_t>(first * geometry_.bytes_per_page);
  std::fill(begin, begin + static_cast<std::ptrdiff_t>(geometry_.bytes_per_block()), 0xFF);
  std::fill_n(program_events_.begin() + static_cast<std::ptrdiff_t>(first),
              geometry_.pages_per_block, 0);
  std::fill_n(exposures_.begin() + static_cast<std::ptrdiff_t>(first), geometry_.pages_per_block,
              0);
}

void FlashDevice::program_page(PageAddress addr, std::span<const std::uint8_t> data,
                               std::uint64_t repeat) {
  auto page = page_bytes(addr);
  if (data.size() != page.size()) {
    throw SizeError("program data is " + std::to_string(data.size()) + " bytes, page holds " +
                    std::to_string(page.size()));
  }
  if (repeat == 0) return;
  for (std::size_t i = 0; i < page.size(); ++i) page[i] &= data[i];
  program_events_[page_slot(addr)] += repeat;
}

std::vector<std::uint8_t> FlashDevice::read_page(PageAddress addr) const {
  auto view = page_view(addr);
  return {view.begin(), view.end()};
}

std::span<const std::uint8_t> FlashDevice::page_view(PageAddress addr) const {
  const std::size_t slot = page_slot(addr);
  return {cells_.data() + slot * geometry_.bytes_per_page, geometry_.bytes_per_page};
}

bool FlashDevice::disturb_cell(PageAddress addr, std::size_t cell) {
  auto page = page_bytes(addr);
  if (cell >= page.size() * 8) {
    throw AddressError("cell " + std::to_string(cell) + " out of range");
  }
  std::uint8_t& byte = page[cell / 8];
  const std::uint8_t mask = cell_mask(cell);
  if ((byte & mask) == 0) return false;
  byte = static_cast<std::uint8_t>(byte & ~mask);
  return true;
}

std::uint64_t FlashDevice::program_events(PageAddress addr) const {
  return program_events_[page_slot(addr)];
}

std::uint64_t FlashDevice::exposures(PageAddress addr) const { return exposures_[page_slot(addr)]; }

void FlashDevice::record_exposures(PageAddress addr, std::uint64_t count) {
  exposures_[page_slot(addr)] += count;
}

}  // namespace flashpuf
