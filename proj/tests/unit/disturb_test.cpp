#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "flashpuf/disturb.hpp"
#include "flashpuf/errors.hpp"
#include "flashpuf/json_io.hpp"
#include "test_support.hpp"

namespace flashpuf {
namespace {

using testing::kDegenerateCondition;

TEST(EffectiveVoltage, RegulatorHoldsNominalWithinDropout) {
  DisturbModelParams p;  // nominal 5.0 V, dropout 0.3 V
  EXPECT_DOUBLE_EQ(effective_voltage({20, 4.8, true}, p), 5.0);
  EXPECT_DOUBLE_EQ(effective_voltage({20, 4.7, true}, p), 5.0);
  EXPECT_DOUBLE_EQ(effective_voltage({20, 4.2, true}, p), 4.2);
  EXPECT_DOUBLE_EQ(effective_voltage({20, 4.2, false}, p), 4.2);
  EXPECT_DOUBLE_EQ(effective_voltage({20, 5.0, false}, p), 5.0);
}

TEST(EffectiveVoltage, HeadroomGainBelowDropout) {
  DisturbModelParams p;
  p.regulator_headroom_gain = 0.5;
  EXPECT_DOUBLE_EQ(effective_voltage({20, 4.0, true}, p), 4.5);
}

TEST(FlipProbability, EqualsBaseRateAtNominal) {
  DisturbModelParams p;
  p.base_rate = 3.7e-5;
  p.volt_coeff = 2.0;
  p.temp_coeff = 0.4;
  EXPECT_DOUBLE_EQ(per_exposure_flip_prob(p, 0.0, 0.0, {20.0, 5.0, false}), 3.7e-5);
}

TEST(FlipProbability, ClampsToOne) {
  DisturbModelParams p;
  p.base_rate = 0.9;
  p.susceptibility_sigma = 1.0;
  EXPECT_EQ(per_exposure_flip_prob(p, 50.0, 0.0, {}), 1.0);
}

TEST(FlipProbability, HalfVoltDropScalesByExpHalfCoeff) {
  DisturbModelParams p = json_io::calibrated_params();
  for (double z : {-1.0, 0.0, 0.7}) {
    const double at_nominal = per_exposure_flip_prob(p, z, 0.0, {20, 5.0, false});
    const double at_low = per_exposure_flip_prob(p, z, 0.0, {20, 4.5, false});
    EXPECT_NEAR(at_low / at_nominal, std::exp(0.5 * p.volt_coeff), 1e-12);
  }
}

TEST(FlipProbability, TemperatureCoefficientPerTenDegrees) {
  DisturbModelParams p;
  p.temp_coeff = 0.3;
  const double r = per_exposure_flip_prob(p, 0, 0, {40, 5.0, false}) /
                   per_exposure_flip_prob(p, 0, 0, {20, 5.0, false});
  EXPECT_NEAR(r, std::exp(0.6), 1e-12);
}

TEST(SampleFlipExposure, DegenerateProbabilities) {
  const TrialNoise noise{12345};
  for (std::uint64_t cell = 0; cell < 1000; ++cell) {
    EXPECT_EQ(sample_flip_exposure(0.0, noise, cell), std::nullopt);
    EXPECT_EQ(sample_flip_exposure(1.0, noise, cell), std::optional<std::uint64_t>(1));
  }
}

TEST(SampleFlipExposure, RejectsInvalidProbability) {
  const TrialNoise noise{1};
  EXPECT_THROW(sample_flip_exposure(-0.01, noise, 0), ParameterError);
  EXPECT_THROW(sample_flip_exposure(1.01, noise, 0), ParameterError);
  EXPECT_THROW(sample_flip_exposure(std::nan(""), noise, 0), ParameterError);
}

TEST(SampleFlipExposure, GeometricMean) {
  const TrialNoise noise{0xfeed};
  double sum = 0;
  constexpr int kSamples = 1'000'000;
  for (int i = 0; i < kSamples; ++i) sum += static_cast<double>(*sample_flip_exposure(0.01, noise, i));
  EXPECT_NEAR(sum / kSamples, 100.0, 2.0);
}

// Two-sample Kolmogorov-Smirnov between the inverse-CDF sampler and a literal
// per-exposure Bernoulli loop driven by an unrelated generator.
TEST(SampleFlipExposure, MatchesBernoulliLoopInDistribution) {
  constexpr int kSamples = 20000;
  for (double p : {0.02, 0.2, 0.6}) {
    const TrialNoise noise{static_cast<std::uint64_t>(p * 1e6)};
    std::mt19937_64 gen(99);
    std::bernoulli_distribution flip(p);
    std::vector<std::uint64_t> geometric(kSamples), bernoulli(kSamples);
    for (int i = 0; i < kSamples; ++i) {
      geometric[i] = *sample_flip_exposure(p, noise, i);
      std::uint64_t n = 1;
      while (!flip(gen)) ++n;
      bernoulli[i] = n;
    }
    std::sort(geometric.begin(), geometric.end());
    std::sort(bernoulli.begin(), bernoulli.end());
    const std::uint64_t top = std::max(geometric.back(), bernoulli.back());
    double d = 0;
    for (std::uint64_t x = 1; x <= top; ++x) {
      const auto fa = std::upper_bound(geometric.begin(), geometric.end(), x) - geometric.begin();
      const auto fb = std::upper_bound(bernoulli.begin(), bernoulli.end(), x) - bernoulli.begin();
      d = std::max(d, std::abs(static_cast<double>(fa - fb)) / kSamples);
    }
    // alpha = 0.001 critical value for equal sample sizes.
    EXPECT_LT(d, 1.95 * std::sqrt(2.0 / kSamples)) << "p=" << p;
  }
}

TEST(DeviceIdentity, StandardNormalAndSeedUnique) {
  const DeviceIdentity a(1), b(2), a2(1);
  constexpr int n = 50000;
  double sum = 0, sq = 0, cross = 0;
  for (int i = 0; i < n; ++i) {
    const double za = a.cell_susceptibility(i), zb = b.cell_susceptibility(i);
    ASSERT_EQ(za, a2.cell_susceptibility(i));
    sum += za;
    sq += za * za;
    cross += za * zb;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.03);
  EXPECT_NEAR(cross / n, 0.0, 0.02);
  EXPECT_NE(a.page_coupling(3), b.page_coupling(3));
}

TEST(TrialNoise, DependsOnEveryKeyComponent) {
  const EnvironmentCondition nominal{};
  const auto base = TrialNoise::derive(1, 0, 0, nominal).trial_seed;
  EXPECT_EQ(base, TrialNoise::derive(1, 0, 0, nominal).trial_seed);
  EXPECT_NE(base, TrialNoise::derive(2, 0, 0, nominal).trial_seed);
  EXPECT_NE(base, TrialNoise::derive(1, 1, 0, nominal).trial_seed);
  EXPECT_NE(base, TrialNoise::derive(1, 0, 1, nominal).trial_seed);
  EXPECT_NE(base, TrialNoise::derive(1, 0, 0, {20, 4.8, false}).trial_seed);
  EXPECT_NE(base, TrialNoise::derive(1, 0, 0, {20, 5.0, true}).trial_seed);
}

TEST(ApplyExposures, AlwaysAndNeverFlip) {
  FlashDevice dev(FlashGeometry{}, 4);
  const PageAddress victim{0, 1};
  const auto noise = TrialNoise::derive(4, 0, 0, kDegenerateCondition);
  EXPECT_EQ(apply_exposures(dev, victim, 1, noise, testing::always_flip_params(),
                            kDegenerateCondition),
            16384u);
  EXPECT_EQ(dev.read_page(victim), std::vector<std::uint8_t>(2048, 0x00));

  FlashDevice fresh(FlashGeometry{}, 4);
  EXPECT_EQ(apply_exposures(fresh, victim, 1'000'000, noise, testing::never_flip_params(),
                            kDegenerateCondition),
            0u);
  EXPECT_EQ(fresh.read_page(victim), std::vector<std::uint8_t>(2048, 0xFF));
  EXPECT_EQ(fresh.exposures(victim), 1'000'000u);
}

TEST(ApplyExposures, SplittingExposuresDoesNotChangeOutcome) {
  const DisturbModelParams params = json_io::calibrated_params();
  const EnvironmentCondition cond{20, 4.4, false};
  const auto noise = TrialNoise::derive(8, 0, 3, cond);
  FlashDevice once(FlashGeometry{}, 8), steps(FlashGeometry{}, 8);
  apply_exposures(once, {0, 5}, 20000, noise, params, cond);
  for (int i = 0; i < 4; ++i) apply_exposures(steps, {0, 5}, 5000, noise, params, cond);
  EXPECT_EQ(once, steps);
}

TEST(ApplyExposures, BadAddressThrows) {
  FlashDevice dev(FlashGeometry{}, 4);
  EXPECT_THROW(apply_exposures(dev, {0, 64}, 1, TrialNoise{1}, DisturbModelParams{}, {}),
               AddressError);
}

// Lower supply (regulator off) never lowers any cell's flip probability.
TEST(FlipProbability, MonotoneInVoltagePerCell) {
  const DisturbModelParams params = json_io::calibrated_params();
  const DeviceIdentity id(21);
  const FlashGeometry g;
  std::vector<double> previous;
  for (double v : {5.0, 4.8, 4.6, 4.4, 4.2, 3.9}) {
    const auto probs = page_flip_probabilities(id, g, {0, 7}, params, {20, v, false});
    if (!previous.empty()) {
      for (std::size_t i = 0; i < probs.size(); ++i) ASSERT_GE(probs[i], previous[i]) << v;
    }
    previous = probs;
  }
}

TEST(FlipProbability, RegulatorReproducesNominalExactly) {
  DisturbModelParams params = json_io::calibrated_params();
  params.regulator_dropout = 0.8;
  const DeviceIdentity id(5);
  const FlashGeometry g;
  const auto nominal = page_flip_probabilities(id, g, {0, 9}, params, {20, 5.0, false});
  for (double v : {4.2, 4.5, 4.9}) {
    EXPECT_EQ(page_flip_probabilities(id, g, {0, 9}, params, {20, v, true}), nominal) << v;
  }
}

TEST(DisturbModelParams, ValidationNamesField) {
  DisturbModelParams p;
  p.base_rate = 0.0;
  try {
    p.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "params.base_rate");
  }
  p = {};
  p.susceptibility_sigma = -1;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(EnvironmentCondition, FixedPointRoundTrip) {
  const EnvironmentCondition c{-12.5, 4.215, true};
  const auto f = to_fixed_point(c);
  EXPECT_EQ(f.centi_celsius, -1250);
  EXPECT_EQ(f.millivolts, 4215u);
  EXPECT_EQ(f.regulator, 1);
  EXPECT_EQ(to_fixed_point(from_fixed_point(f)), f);
  EXPECT_EQ(c.label(), "T-12.50C_V4.215_reg1");
  EXPECT_THROW((EnvironmentCondition{20, 0.0, false}.validate()), ConfigError);
}

}  // namespace
}  // namespace flashpuf
