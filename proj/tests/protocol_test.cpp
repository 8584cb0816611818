#include <jamcap/protocol.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace jamcap;

TEST(PhaseLength, Examples)
{
  EXPECT_EQ(phase_length(regime::known_tprime_delta, 0.5, 10), 10u);
  EXPECT_EQ(phase_length(regime::known_delta_only, 0.5), 1u);
  EXPECT_EQ(phase_length(regime::stochastic_tuned, 0.5), 9u);
  EXPECT_EQ(phase_length(regime::simulation_variant, 0.8), 8u);
  EXPECT_EQ(phase_length(regime::synchronized_unknown_delta, 0.5, 7), 7u);
}

TEST(PhaseLength, CeilingIgnoresRoundingNoise)
{
  // 6 / 0.6 evaluates to 10.000000000000002.
  EXPECT_EQ(phase_length(regime::simulation_variant, 0.6), 10u);
  EXPECT_EQ(phase_length(regime::simulation_variant, 1.0), 6u);
  EXPECT_EQ(phase_length(regime::simulation_variant, 0.35), 18u);
}

TEST(PhaseLength, Errors)
{
  EXPECT_THROW(phase_length(regime::known_tprime_delta, 0.5), parameter_error);
  EXPECT_THROW(phase_length(regime::synchronized_unknown_delta, 0.5), parameter_error);
  EXPECT_THROW(phase_length(regime::known_tprime_delta, 0.5, 0), parameter_error);
  EXPECT_THROW(phase_length(regime::simulation_variant, 0.0), parameter_error);
  EXPECT_THROW(phase_length(regime::simulation_variant, 1.1), parameter_error);
}

TEST(MakePolicy, FillsThreshold)
{
  const auto p = make_policy(regime::known_tprime_delta, 0.6, 10);
  EXPECT_EQ(p.k, 10u);
  EXPECT_DOUBLE_EQ(p.mu, 0.3);
  EXPECT_DOUBLE_EQ(make_policy(regime::known_delta_only, 0.5).mu, 1.0);
  EXPECT_DOUBLE_EQ(make_policy(regime::simulation_variant, 0.8, std::nullopt, 0.25).idle_loss, 0.25);
}

TEST(PhaseSuccess, Examples)
{
  EXPECT_TRUE(phase_success({true, 3, 10}, 0.3));
  EXPECT_FALSE(phase_success({true, 2, 10}, 0.3));
  EXPECT_FALSE(phase_success({false, 0, 10}, 0.3));
  EXPECT_TRUE(phase_success({true, 10, 10}, 1.0));
  EXPECT_FALSE(phase_success({true, 0, 0}, 0.3));
  EXPECT_THROW(phase_success({true, 11, 10}, 0.3), usage_error);
}

TEST(PhaseUtility, Examples)
{
  EXPECT_DOUBLE_EQ(phase_utility(regime::known_tprime_delta, {true, 5, 10}, 0.3, 0.6), 1.0);
  EXPECT_DOUBLE_EQ(phase_utility(regime::known_tprime_delta, {true, 1, 10}, 0.3, 0.6), -1.0);
  EXPECT_DOUBLE_EQ(phase_utility(regime::stochastic_tuned, {false, 0, 9}, 0.25, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(phase_utility(regime::known_delta_only, {true, 0, 1}, 1.0, 0.5), -1.0 / 3.0);
  EXPECT_DOUBLE_EQ(phase_utility(regime::known_delta_only, {true, 1, 1}, 1.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(phase_utility(regime::known_delta_only, {false, 0, 1}, 1.0, 0.5), 0.0);
  EXPECT_THROW(phase_utility(regime::known_delta_only, {true, 1, 4}, 1.0, 0.5), usage_error);
}

TEST(PhaseUtility, RangeAndLossMapping)
{
  for (const double delta : {0.1, 0.5, 0.9, 1.0})
  {
    const double worst = -delta / (2.0 - delta);
    EXPECT_DOUBLE_EQ(loss_from_utility(regime::known_delta_only, 1.0, delta), 0.0);
    EXPECT_DOUBLE_EQ(loss_from_utility(regime::known_delta_only, worst, delta), 1.0);
  }
  EXPECT_DOUBLE_EQ(loss_from_utility(regime::known_tprime_delta, 1.0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(loss_from_utility(regime::known_tprime_delta, 0.0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(loss_from_utility(regime::known_tprime_delta, -1.0, 0.5), 1.0);
}

TEST(SimLoss, Examples)
{
  const auto ok = sim_loss({true, 4, 8}, 0.4, 0.5);
  EXPECT_DOUBLE_EQ(ok.send, 0.0);
  EXPECT_DOUBLE_EQ(ok.idle, 0.5);
  const auto bad = sim_loss({true, 1, 8}, 0.4, 0.5);
  EXPECT_DOUBLE_EQ(bad.send, 1.0);
  EXPECT_DOUBLE_EQ(bad.idle, 0.5);
  // Counterfactual outcomes are passed in as attempted phases.
  const auto cf = sim_loss({true, 8, 8}, 0.4, 0.5);
  EXPECT_DOUBLE_EQ(cf.send, 0.0);
}

TEST(DeltaGuess, RulerSequence)
{
  const double expected[] = {0.5, 0.25, 0.5, 0.125, 0.5, 0.25, 0.5, 0.0625};
  for (std::uint64_t i = 1; i <= 8; ++i) EXPECT_DOUBLE_EQ(delta_guess(i, 6), expected[i - 1]) << i;
  EXPECT_DOUBLE_EQ(delta_guess(8, 3), 0.125);
  for (std::uint64_t i = 1; i <= 64; ++i) EXPECT_DOUBLE_EQ(delta_guess(i, 1), 0.5);
  EXPECT_THROW(delta_guess(0, 4), parameter_error);
  EXPECT_THROW(delta_guess(1, 0), parameter_error);
}

TEST(DeltaGuess, DyadicFrequencies)
{
  for (const std::uint64_t j_max : {3u, 6u, 20u})
  {
    constexpr int m = 12;
    std::map<std::uint64_t, std::uint64_t> count;
    for (std::uint64_t i = 1; i <= (1u << m); ++i) ++count[guess_level(i, j_max)];
    for (std::uint64_t j = 1; j < std::min<std::uint64_t>(m, j_max); ++j)
      EXPECT_EQ(count[j], (1u << m) >> j) << "level " << j << " j_max " << j_max;
    std::uint64_t total = 0;
    for (const auto& [lvl, c] : count)
    {
      EXPECT_LE(lvl, j_max);
      total += c;
    }
    EXPECT_EQ(total, 1u << m);
  }
}

TEST(PhasePolicy, Validate)
{
  phase_policy p;
  EXPECT_NO_THROW(p.validate());
  p.k = 0;
  EXPECT_THROW(p.validate(), parameter_error);
  p = {};
  p.mu = 0.0;
  EXPECT_THROW(p.validate(), parameter_error);
  p = {};
  p.idle_loss = 2.0;
  EXPECT_THROW(p.validate(), parameter_error);
  p = {};
  p.fixed_eta = 1.0;
  EXPECT_THROW(p.validate(), parameter_error);
}
