#include <gtest/gtest.h>

#include <filesystem>

#include "flashpuf/dump_file.hpp"
#include "flashpuf/errors.hpp"
#include "flashpuf/json_io.hpp"
#include "flashpuf/metrics.hpp"
#include "test_support.hpp"

namespace flashpuf::dump {
namespace {

ResponseSet sample_set(std::size_t trials = 3) {
  return collect_responses(FlashDevice(testing::small_geometry(), 0xABCDEF), 0,
                           testing::small_hammer(), json_io::calibrated_params(),
                           {-5.5, 4.35, true}, trials);
}

TEST(Dump, EncodeDecodeRoundTrip) {
  const auto set = sample_set();
  const auto bytes = encode(set);
  EXPECT_EQ(bytes.size(), 43u + 3 * 8 + 3 * 4 * 64);
  const auto back = decode(bytes);
  EXPECT_EQ(back.responses, set.responses);
  EXPECT_EQ(back.geometry, set.geometry);
  EXPECT_EQ(back.condition, set.condition);
  EXPECT_EQ(encode(back), bytes);
}

TEST(Dump, HeaderLayout) {
  const auto set = sample_set(2);
  const auto bytes = encode(set);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FPUF");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[6], 8);      // pages per block
  EXPECT_EQ(bytes[10], 64);    // bytes per page
  EXPECT_EQ(bytes[22], 0xEF);  // device seed, low byte first
  EXPECT_EQ(bytes[39], 2);     // trial count
  const auto h = decode_header(bytes);
  EXPECT_EQ(h.condition.centi_celsius, -550);
  EXPECT_EQ(h.condition.millivolts, 4350u);
  EXPECT_EQ(h.condition.regulator, 1);
  EXPECT_EQ(h.halt_cycles, (std::vector<std::uint64_t>{set.halt_cycle(0), set.halt_cycle(1)}));
  EXPECT_EQ(h.payload_bytes(), 2u * 4 * 64);
}

TEST(Dump, RejectsTruncationAndBadMagic) {
  const auto bytes = encode(sample_set(1));
  for (std::size_t cut : {0ul, 5ul, 30ul, 45ul, bytes.size() - 1}) {
    EXPECT_THROW(decode(std::span(bytes).first(cut)), FormatError) << cut;
  }
  auto magic = bytes;
  magic[3] = 'G';
  EXPECT_THROW(decode(magic), FormatError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(decode(version), FormatError);
  auto trailing = bytes;
  trailing.push_back(1);
  EXPECT_THROW(decode(trailing), FormatError);
}

TEST(Dump, FileRoundTripPreservesMetrics) {
  const auto dir = std::filesystem::temp_directory_path() / "flashpuf_dump_test";
  std::filesystem::create_directories(dir);
  const auto set = sample_set();
  write_file(dir / "a.fpuf", set);
  const auto back = read_file(dir / "a.fpuf");
  EXPECT_EQ(build_report(back), build_report(set));
  EXPECT_EQ(read_header(dir / "a.fpuf").device_seed, 0xABCDEFu);
  EXPECT_THROW(read_file(dir / "missing.fpuf"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace flashpuf::dump
