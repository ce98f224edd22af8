#include <gtest/gtest.h>

#include <random>

#include "flashpuf/errors.hpp"
#include "flashpuf/flash_device.hpp"
#include "test_support.hpp"

namespace flashpuf {
namespace {

TEST(FlashDevice, EraseReadsAllOnes) {
  FlashDevice dev(FlashGeometry{}, 7);
  dev.erase_block(0);
  const auto page = dev.read_page({0, 17});
  ASSERT_EQ(page.size(), 2048u);
  for (auto b : page) EXPECT_EQ(b, 0xFF);
}

TEST(FlashDevice, EraseRestoresProgrammedPage) {
  FlashDevice dev(FlashGeometry{}, 7);
  dev.program_page({0, 0}, std::vector<std::uint8_t>(2048, 0x00));
  dev.erase_block(0);
  EXPECT_EQ(dev.read_page({0, 0}), std::vector<std::uint8_t>(2048, 0xFF));
}

TEST(FlashDevice, EraseOutOfRangeBlock) {
  FlashDevice dev(FlashGeometry{}, 7);
  EXPECT_THROW(dev.erase_block(5), AddressError);
}

TEST(FlashDevice, ProgramIsBitwiseAnd) {
  FlashDevice dev(FlashGeometry{}, 1);
  dev.program_page({0, 2}, std::vector<std::uint8_t>(2048, 0x00));
  EXPECT_EQ(dev.read_page({0, 2}), std::vector<std::uint8_t>(2048, 0x00));

  dev.program_page({0, 3}, std::vector<std::uint8_t>(2048, 0x0F));
  dev.program_page({0, 3}, std::vector<std::uint8_t>(2048, 0xF0));
  EXPECT_EQ(dev.read_page({0, 3}), std::vector<std::uint8_t>(2048, 0x00));

  dev.program_page({0, 2}, std::vector<std::uint8_t>(2048, 0xFF));
  EXPECT_EQ(dev.read_page({0, 2}), std::vector<std::uint8_t>(2048, 0x00));
}

TEST(FlashDevice, ProgramErrors) {
  FlashDevice dev(FlashGeometry{}, 1);
  EXPECT_THROW(dev.program_page({0, 0}, std::vector<std::uint8_t>(2047, 0)), SizeError);
  EXPECT_THROW(dev.program_page({0, 64}, std::vector<std::uint8_t>(2048, 0)), AddressError);
  EXPECT_THROW(dev.program_page({1, 0}, std::vector<std::uint8_t>(2048, 0)), AddressError);
  EXPECT_THROW(dev.read_page({0, 64}), AddressError);
}

TEST(FlashDevice, ReadIsIdempotent) {
  FlashDevice dev(FlashGeometry{}, 3);
  dev.disturb_cell({0, 5}, 100);
  const FlashDevice before = dev;
  EXPECT_EQ(dev.read_page({0, 5}), dev.read_page({0, 5}));
  EXPECT_EQ(dev, before);
}

TEST(FlashDevice, CellOrderIsMsbFirst) {
  FlashDevice dev(FlashGeometry{}, 3);
  EXPECT_TRUE(dev.disturb_cell({0, 1}, 3));
  EXPECT_EQ(dev.read_page({0, 1})[0], 0xEF);
  EXPECT_FALSE(dev.disturb_cell({0, 1}, 3));
}

TEST(FlashDevice, GeometryValidation) {
  EXPECT_THROW(FlashDevice(FlashGeometry{63, 2048, 1}, 0), ConfigError);
  EXPECT_THROW(FlashDevice(FlashGeometry{2, 2048, 1}, 0), ConfigError);
  EXPECT_THROW(FlashDevice(FlashGeometry{64, 0, 1}, 0), ConfigError);
  EXPECT_THROW(FlashDevice(FlashGeometry{64, 2048, 0}, 0), ConfigError);
}

TEST(FlashDevice, EraseResetsBookkeeping) {
  FlashDevice dev(FlashGeometry{8, 16, 2}, 3);
  dev.program_page({1, 2}, std::vector<std::uint8_t>(16, 0), 5);
  dev.record_exposures({1, 3}, 9);
  EXPECT_EQ(dev.program_events({1, 2}), 5u);
  EXPECT_EQ(dev.exposures({1, 3}), 9u);
  dev.erase_block(0);
  EXPECT_EQ(dev.program_events({1, 2}), 5u);
  dev.erase_block(1);
  EXPECT_EQ(dev.program_events({1, 2}), 0u);
  EXPECT_EQ(dev.exposures({1, 3}), 0u);
}

TEST(FlashDevice, BlocksAreIndependent) {
  FlashDevice dev(FlashGeometry{8, 16, 2}, 3);
  dev.program_page({0, 0}, std::vector<std::uint8_t>(16, 0));
  EXPECT_EQ(dev.read_page({1, 0}), std::vector<std::uint8_t>(16, 0xFF));
  dev.program_page({1, 0}, std::vector<std::uint8_t>(16, 0));
  dev.erase_block(1);
  EXPECT_EQ(dev.read_page({0, 0}), std::vector<std::uint8_t>(16, 0));
}

// Random program/disturb/read sequences: between erases no cell ever goes
// from 0 back to 1, and a second erase restores the pristine state.
TEST(FlashDevice, MonotoneBetweenErasesAndIdempotentReset) {
  const FlashGeometry g{8, 32, 2};
  std::mt19937_64 gen(2024);
  for (int round = 0; round < 50; ++round) {
    FlashDevice dev(g, 11);
    dev.erase_block(1);
    const FlashDevice pristine = dev;
    std::vector<std::uint8_t> previous = dev.read_page({1, 3});
    for (int op = 0; op < 40; ++op) {
      const std::size_t page = gen() % g.pages_per_block;
      switch (gen() % 3) {
        case 0: dev.program_page({1, page}, testing::random_bytes(gen, g.bytes_per_page)); break;
        case 1: dev.disturb_cell({1, page}, gen() % g.bits_per_page()); break;
        default: {
          const FlashDevice snapshot = dev;
          (void)dev.read_page({1, page});
          ASSERT_EQ(dev, snapshot);
        }
      }
      const auto now = dev.read_page({1, 3});
      for (std::size_t i = 0; i < now.size(); ++i) {
        ASSERT_EQ(now[i] & ~previous[i] & 0xFF, 0) << "0->1 transition in byte " << i;
      }
      previous = now;
    }
    dev.erase_block(1);
    EXPECT_EQ(dev, pristine);
  }
}

}  // namespace
}  // namespace flashpuf
