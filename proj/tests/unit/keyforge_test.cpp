#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "flashpuf/errors.hpp"
#include "flashpuf/keyforge.hpp"
#include "test_support.hpp"

namespace flashpuf::keyforge {
namespace {

using flashpuf::testing::random_bytes;

void flip_bit(std::vector<std::uint8_t>& bytes, std::size_t bit) {
  bytes[bit / 8] ^= cell_mask(bit);
}

// Flips `errors` distinct selected positions of group k.
void corrupt_group(std::vector<std::uint8_t>& response, const HelperData& h, std::size_t k,
                   unsigned errors, std::mt19937_64& gen) {
  std::vector<std::size_t> slots(h.code.repetition);
  std::iota(slots.begin(), slots.end(), k * h.code.repetition);
  std::shuffle(slots.begin(), slots.end(), gen);
  for (unsigned e = 0; e < errors; ++e) flip_bit(response, h.bit_selection[slots[e]]);
}

TEST(Sha256, KnownVector) {
  const std::string abc = "abc";
  const auto d = sha256({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()});
  EXPECT_EQ(d[0], 0xba);
  EXPECT_EQ(d[1], 0x78);
  EXPECT_EQ(d[31], 0xad);
}

TEST(Enroll, RoundTripOnBlockResponse) {
  std::mt19937_64 gen(1);
  const auto response = random_bytes(gen, 65536);
  const auto e = enroll(response, std::nullopt, {}, 42);
  EXPECT_EQ(e.key.key.size(), 16u);
  EXPECT_EQ(e.helper.bit_selection.size(), 1152u);
  EXPECT_EQ(e.helper.mask.size(), 144u);
  EXPECT_EQ(reconstruct(response, e.helper), e.key);
}

TEST(Enroll, SeedsGiveDistinctKeysAndCsprngWorks) {
  std::mt19937_64 gen(2);
  const auto response = random_bytes(gen, 2048);
  const auto a = enroll(response, std::nullopt, {}, 1), b = enroll(response, std::nullopt, {}, 2);
  EXPECT_NE(a.key, b.key);
  EXPECT_EQ(enroll(response, std::nullopt, {}, 1).helper, a.helper);
  const auto c = enroll(response);
  EXPECT_EQ(reconstruct(response, c.helper), c.key);
}

TEST(Enroll, ParameterAndSizeErrors) {
  std::mt19937_64 gen(3);
  const auto response = random_bytes(gen, 2048);
  EXPECT_THROW(enroll(response, std::nullopt, {8, 128}, 1), ParameterError);
  EXPECT_THROW(enroll(response, std::nullopt, {1, 128}, 1), ParameterError);
  EXPECT_THROW(enroll(response, std::nullopt, {9, 12}, 1), ParameterError);
  EXPECT_THROW(enroll(std::vector<std::uint8_t>(143), std::nullopt, {}, 1), SizeError);
  const auto e = enroll(response, std::nullopt, {}, 1);
  EXPECT_THROW(reconstruct(std::vector<std::uint8_t>(100), e.helper), SizeError);
}

TEST(Reconstruct, CorrectsUpToHalfRepetitionPerGroup) {
  std::mt19937_64 gen(4);
  const auto response = random_bytes(gen, 4096);
  const auto e = enroll(response, std::nullopt, {}, 5);
  auto noisy = response;
  for (std::size_t k = 0; k < 128; ++k) corrupt_group(noisy, e.helper, k, 4, gen);
  EXPECT_EQ(reconstruct(noisy, e.helper), e.key);
}

TEST(Reconstruct, FiveErrorsInOneGroupFails) {
  std::mt19937_64 gen(6);
  const auto response = random_bytes(gen, 4096);
  const auto e = enroll(response, std::nullopt, {}, 7);
  auto noisy = response;
  corrupt_group(noisy, e.helper, 17, 5, gen);
  EXPECT_EQ(reconstruct(noisy, e.helper), std::nullopt);
}

TEST(Reconstruct, HeavyNoiseNeverReturnsWrongKey) {
  std::mt19937_64 gen(8);
  const auto response = random_bytes(gen, 2048);
  const auto e = enroll(response, std::nullopt, {}, 9);
  std::size_t recovered = 0;
  for (int i = 0; i < 300; ++i) {
    auto noisy = response;
    std::bernoulli_distribution flip(0.05 + 0.45 * (i % 10) / 10.0);
    for (std::size_t bit = 0; bit < noisy.size() * 8; ++bit) {
      if (flip(gen)) flip_bit(noisy, bit);
    }
    const auto got = reconstruct(noisy, e.helper);
    if (got) {
      ASSERT_EQ(*got, e.key);
      ++recovered;
    }
  }
  EXPECT_GT(recovered, 0u);
  EXPECT_LT(recovered, 300u);
}

TEST(Enroll, MaskBitsAreUniform) {
  std::mt19937_64 gen(10);
  const auto response = random_bytes(gen, 2048);
  constexpr int kEnrollments = 200;
  std::vector<int> ones(1152, 0);
  for (int s = 0; s < kEnrollments; ++s) {
    const auto e = enroll(response, std::nullopt, {}, 1000 + s);
    for (std::size_t j = 0; j < 1152; ++j) ones[j] += cell_value(e.helper.mask, j);
  }
  double chi2 = 0;
  for (int o : ones) chi2 += std::pow(o - kEnrollments / 2.0, 2) / (kEnrollments / 4.0);
  EXPECT_LT(std::abs(chi2 - 1152.0), 5.0 * std::sqrt(2.0 * 1152.0));
}

TEST(SelectBits, StableBitsFirst) {
  std::vector<double> stability(64, 0.5);
  stability[10] = 0.0;
  stability[3] = 1.0;
  stability[40] = 0.95;
  stability[7] = 0.45;
  EXPECT_EQ(select_bits(64, 3, std::span<const double>(stability)),
            (std::vector<std::uint32_t>{3, 10, 40}));
  EXPECT_EQ(select_bits(64, 4, std::span<const double>(stability)),
            (std::vector<std::uint32_t>{3, 7, 10, 40}));
  EXPECT_EQ(select_bits(64, 4, std::nullopt), (std::vector<std::uint32_t>{0, 16, 32, 48}));
}

TEST(Enroll, StabilityMapAvoidsNoisyBits) {
  std::mt19937_64 gen(11);
  const auto response = random_bytes(gen, 2048);
  std::vector<double> stability(16384, 0.5);
  for (std::size_t i = 0; i < 16384; i += 8) stability[i] = (response[i / 8] & 0x80) ? 0.0 : 1.0;
  const auto e = enroll(response, std::span<const double>(stability), {}, 3);
  for (auto idx : e.helper.bit_selection) EXPECT_EQ(idx % 8, 0u);
  auto noisy = response;
  for (std::size_t i = 0; i < 16384; ++i) {
    if (i % 8 != 0) flip_bit(noisy, i);
  }
  EXPECT_EQ(reconstruct(noisy, e.helper), e.key);
}

TEST(HelperData, SerializationRoundTripAndLayout) {
  std::mt19937_64 gen(12);
  const auto e = enroll(random_bytes(gen, 2048), std::nullopt, {3, 16}, 4);
  const auto bytes = e.helper.serialize();
  ASSERT_EQ(bytes.size(), 4u + 2 + 2 + 2 + 4 + 48 * 4 + 6 + 16 + 32);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FPHD");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[6], 3);
  EXPECT_EQ(bytes[8], 16);
  EXPECT_EQ(bytes[10], 48);
  EXPECT_EQ(HelperData::parse(bytes), e.helper);
}

TEST(HelperData, ParseRejectsMalformedInput) {
  std::mt19937_64 gen(13);
  const auto bytes = enroll(random_bytes(gen, 2048), std::nullopt, {}, 4).helper.serialize();
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(HelperData::parse(bad_magic), FormatError);
  for (std::size_t cut : {0ul, 3ul, 10ul, 100ul, bytes.size() - 1}) {
    EXPECT_THROW(HelperData::parse(std::span(bytes).first(cut)), FormatError) << cut;
  }
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(HelperData::parse(trailing), FormatError);
  auto even_r = bytes;
  even_r[6] = 8;
  EXPECT_THROW(HelperData::parse(even_r), FormatError);
}

TEST(ExpectedFailureRate, ClosedFormExamples) {
  EXPECT_EQ(expected_failure_rate(0.0, 9, 128), 0.0);
  EXPECT_NEAR(expected_failure_rate(0.5, 1, 1), 0.5, 1e-12);
  EXPECT_NEAR(expected_failure_rate(0.5, 9, 1), 0.5, 1e-12);
  EXPECT_NEAR(expected_failure_rate(0.1, 3, 1), 3 * 0.01 * 0.9 + 0.001, 1e-12);
  EXPECT_THROW(expected_failure_rate(0.6, 9, 128), DomainError);
  EXPECT_THROW(expected_failure_rate(0.1, 8, 128), DomainError);
  EXPECT_THROW(expected_failure_rate(0.1, 9, 0), DomainError);
}

TEST(ExpectedFailureRate, MatchesMonteCarlo) {
  std::mt19937_64 gen(14);
  constexpr int kKeys = 20000;
  const double p = 0.15;
  std::binomial_distribution<int> errors(9, p);
  int failures = 0;
  for (int i = 0; i < kKeys; ++i) {
    bool failed = false;
    for (int k = 0; k < 128; ++k) failed |= errors(gen) > 4;
    failures += failed;
  }
  const double expected = expected_failure_rate(p, 9, 128);
  EXPECT_NEAR(static_cast<double>(failures) / kKeys, expected, 0.05 * expected);
}

}  // namespace
}  // namespace flashpuf::keyforge
