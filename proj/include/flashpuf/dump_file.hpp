#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "flashpuf/disturb.hpp"
#include "flashpuf/flash_device.hpp"
#include "flashpuf/protocol.hpp"

// FPUF response dump, little-endian throughout:
//
//   magic            "FPUF"
//   version          u16 (= 1)
//   pages_per_block  u32
//   bytes_per_page   u32
//   blocks_per_dev   u32
//   block            u32
//   device_seed      u64
//   temperature      i32  centi-degC
//   supply voltage   u32  mV
//   regulator        u8
//   trial count      u32
//   halt cycles      u64 x trial count
//   payloads         bytes_per_page x (pages_per_block / 2) x trial count,
//                    trial-major, victim pages ascending
namespace flashpuf::dump {

inline constexpr std::uint16_t kFormatVersion = 1;

struct DumpHeader {
  std::uint16_t version = kFormatVersion;
  FlashGeometry geometry;
  std::uint32_t block = 0;
  std::uint64_t device_seed = 0;
  FixedPointCondition condition;
  std::uint32_t trial_count = 0;
  std::vector<std::uint64_t> halt_cycles;

  std::size_t payload_bytes() const noexcept;
  bool operator==(const DumpHeader&) const = default;
};

std::vector<std::uint8_t> encode(const ResponseSet& set);
// Throws FormatError on bad magic, unsupported version, or truncation.
ResponseSet decode(std::span<const std::uint8_t> bytes);
DumpHeader decode_header(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, const ResponseSet& set);
ResponseSet read_file(const std::filesystem::path& path);
DumpHeader read_header(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace flashpuf::dump
