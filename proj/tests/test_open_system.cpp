#include <gtest/gtest.h>

#include <cmath>

#include "crowdcontest/open_system.hpp"

using namespace crowdcontest;
using namespace crowdcontest::open_system;

namespace {

OpenConfig earliest(double rate, std::size_t M, std::size_t n, double ratio) {
  OpenConfig c;
  c.poisson = {rate, M};
  c.strategy = EarliestN{n};
  c.e0_ratio = ratio;
  return c;
}

}  // namespace

TEST(OpenEarliestNProb, Examples) {
  EXPECT_NEAR(open_earliest_n_prob(1.0, 1.0, 1), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(open_earliest_n_prob(1.0, 1.0, 2), 2 * std::exp(-1.0), 1e-15);
  EXPECT_EQ(open_earliest_n_prob(1.0, 0.0, 3), 1.0);
  EXPECT_THROW(open_earliest_n_prob(0.0, 1.0, 1), invalid_input);
  for (int k = 1; k < 50; ++k) {
    EXPECT_LE(open_earliest_n_prob(2.0, 0.1 * k, 3), open_earliest_n_prob(2.0, 0.1 * (k - 1), 3));
    EXPECT_LE(open_earliest_n_prob(2.0, 0.1 * k, 3), open_earliest_n_prob(2.0, 0.1 * k, 4));
  }
}

TEST(OpenEarliestN, LoneContributor) {
  const auto g = solve_bne_open_earliest_n(earliest(1.0, 1, 1, 0.25));
  EXPECT_NEAR(g.efforts.front(), 0.25, 1e-12);
  for (std::size_t k = 0; k < g.times.size(); k += 5) {
    const double b_s = std::exp(-g.times[k]);
    EXPECT_NEAR(g.efforts[k], std::max(0.0, std::sqrt(b_s * 0.25) - 0.25), 1e-9);
  }
}

TEST(OpenEarliestN, EffortsFallWithArrivalTime) {
  auto c = earliest(2.0, 12, 3, 0.1);
  const auto g = solve_bne_open_earliest_n(c);
  for (std::size_t k = 1; k < g.efforts.size(); ++k) {
    EXPECT_LE(g.efforts[k], g.efforts[k - 1] + 1e-9);
    EXPECT_LE(g.efforts[k], bayes::effort_upper_bound(g.rewards[k], c.nature_effort()) + 1e-9);
  }
  const double peak = g.efforts.front();
  for (std::size_t k = 0; k < g.times.size(); ++k)
    if (g.efforts[k] > 1e-3 * peak) EXPECT_NEAR(g.foc_value[k], 1.0, 1e-5 + 3 * g.foc_std_error[k]);
}

TEST(OpenEarliestN, RateOnlyRescalesTime) {
  const auto slow = solve_bne_open_earliest_n(earliest(1.0, 8, 2, 0.1));
  const auto fast = solve_bne_open_earliest_n(earliest(4.0, 8, 2, 0.1));
  for (std::size_t k = 0; k < slow.times.size(); ++k) {
    EXPECT_NEAR(fast.times[k] * 4.0, slow.times[k], 1e-12);
    EXPECT_NEAR(fast.efforts[k], slow.efforts[k], 1e-12);
  }
}

TEST(OpenStageOne, FullAllocation) {
  auto c = earliest(1.5, 6, 6, 0.0);
  const auto rep = stage1_open_earliest_n(c, solve_bne_open_earliest_n(c));
  EXPECT_NEAR(rep.expected_payment.mean, 1.0, 1e-12);
}

TEST(OpenStageOne, ScalesWithReward) {
  auto c = earliest(2.0, 8, 2, 0.2);
  c.weight = timing::presets::clock_step();
  const auto one = stage1_open_earliest_n(c, solve_bne_open_earliest_n(c));
  const auto two_cfg = c.with_reward(2.0);
  const auto two = stage1_open_earliest_n(two_cfg, solve_bne_open_earliest_n(two_cfg));
  EXPECT_NEAR(two.expected_utility, 2.0 * one.expected_utility, 1e-6 * one.expected_utility);  // solver tolerance, not sampling
  EXPECT_NEAR(two.expected_efficiency.mean, one.expected_efficiency.mean, 1e-6);
}

TEST(OpenTerminationProb, ExamplesAndNormalization) {
  EXPECT_NEAR(open_termination_prob(1.0, 1.0, 0), std::exp(-1.0) / (1 - std::exp(-1.0)), 1e-15);
  for (double m : {0.01, 0.5, 1.0, 5.0, 20.0}) {
    double s = 0.0;
    for (std::size_t k = 0; k <= 200; ++k) s += open_termination_prob(m, 1.0, k);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  std::size_t mode = 0;
  for (std::size_t k = 1; k < 200; ++k)
    if (open_termination_prob(40.0, 1.0, k) > open_termination_prob(40.0, 1.0, mode)) mode = k;
  EXPECT_NEAR(static_cast<double>(mode), 39.0, 1.0);
  EXPECT_THROW(open_termination_prob(1.0, 0.0, 0), invalid_input);
}

TEST(OpenTermination, ClosedFormWithoutNature) {
  // 50-term direct summation as the reference.
  const double q = std::exp(-1.0) / (1 - std::exp(-1.0));
  double ref = 0.0, fact = 1.0;
  for (int k = 1; k <= 50; ++k) {
    fact *= k + 1;
    ref += q / fact * k / ((k + 1.0) * (k + 1.0));
  }
  EXPECT_NEAR(solve_bne_open_termination(1.0, 1.0, 1.0, 0.0), ref, 1e-10);
  EXPECT_NEAR(ref, 0.0997525994, 1e-9);
}

TEST(OpenTermination, ShortWindowLeavesPlayerWithNature) {
  EXPECT_NEAR(solve_bne_open_termination(1.0, 1e-6, 1.0, 0.25), 0.25, 1e-5);
  for (double e0 : {0.05, 0.3})
    for (double m : {0.3, 2.0, 9.0}) {
      const double e = solve_bne_open_termination(m, 1.0, 1.0, e0);
      EXPECT_NEAR(open_termination_lhs(m, 1.0, 1.0, e0, e), 1.0, 1e-10);
    }
}

TEST(OpenTermination, ConditionalEfficiency) {
  const auto one = timing::WeightFunction::constant(1.0);
  EXPECT_NEAR(open_termination_conditional_eff(1, 0.1, 1.0, 2.0, one, 0.5), 0.6, 1e-12);
  EXPECT_NEAR(open_termination_conditional_eff(3, 0.1, 1.0, 7.0, one, 0.5), 0.8, 1e-12);
  EXPECT_EQ(open_termination_conditional_eff(0, 0.1, 1.0, 2.0, one, 0.5), 0.0);
}

TEST(OpenTermination, ConditionalEfficiencyMatchesOrderedUniforms) {
  const auto w = timing::presets::normalized_inverse_cubic();
  const double T = 2.0, e = 0.1, e0 = 0.3, b = 1.0;
  for (std::size_t m : {1u, 2u, 4u}) {
    auto sampler = [&](numerics::Rng& rng) {
      std::vector<double> s(m);
      for (auto& x : s) x = T * numerics::uniform01(rng);
      std::sort(s.begin(), s.end());
      return s;
    };
    auto eff = [&](const std::vector<double>& s) {
      double acc = 0.0;
      for (double x : s) acc += w(x);
      return (e0 + m * e) / (b * m) * acc;
    };
    const auto mc = numerics::mc_expect(sampler, eff, 200'000, numerics::RngSeed{m});
    EXPECT_NEAR(open_termination_conditional_eff(m, e, b, T, w, e0), mc.mean, 3 * mc.std_error);
  }
}

TEST(OpenTermination, StageOneMatchesSimulation) {
  OpenConfig c;
  c.poisson = {3.0, 30};
  c.strategy = Termination{1.2};
  c.e0_ratio = 0.2;
  c.weight = timing::presets::normalized_step();
  const double e = solve_bne_open_termination(c);
  const auto rep = stage1_open_termination(c, e);
  auto sampler = [&](numerics::Rng& rng) { return timing::sample_arrival_sequence(c.poisson, rng, 40); };
  auto draw = [&](const std::vector<double>& s) -> std::array<double, 3> {
    double util = 0.0, m = 0.0;
    for (double x : s)
      if (x <= 1.2) {
        util += c.weight(x) * e;
        m += 1.0;
      }
    if (m == 0.0) return {0.0, 0.0, 0.0};
    const double paid = m * e / (0.2 + m * e);
    return {util, paid, util / paid};
  };
  const auto mc = numerics::mc_expect_many<3>(sampler, draw, 300'000, numerics::RngSeed{17});
  EXPECT_NEAR(rep.expected_utility, mc[0].mean, 4 * mc[0].std_error);
  EXPECT_NEAR(rep.expected_payment.mean, mc[1].mean, 4 * mc[1].std_error);
  EXPECT_NEAR(rep.expected_efficiency.mean, mc[2].mean, 4 * mc[2].std_error);
}

TEST(OpenOptimalT, SinglePeakedCurve) {
  OpenConfig c;
  c.poisson = {4.0, 30};
  c.strategy = Termination{1.0};
  c.e0_ratio = 0.2;
  c.weight = timing::presets::normalized_step();
  std::vector<double> Ts;
  for (int k = 1; k <= 30; ++k) Ts.push_back(0.1 * k);
  const auto best = open_optimal_T(c, Ts);
  std::size_t peak = 0;
  for (std::size_t k = 0; k < Ts.size(); ++k)
    if (best.curve[k].expected_efficiency.mean > best.curve[peak].expected_efficiency.mean) peak = k;
  for (std::size_t k = 1; k < Ts.size(); ++k) {
    const double d = best.curve[k].expected_efficiency.mean - best.curve[k - 1].expected_efficiency.mean;
    if (k <= peak) EXPECT_GE(d, -1e-12);
    else EXPECT_LE(d, 1e-12);
  }
  EXPECT_GE(best.efficiency, best.curve[peak].expected_efficiency.mean);
  EXPECT_LE(best.T, 1.5 + 0.1);
}

TEST(OpenOptimalT, VanishingWindowHasNoValue) {
  OpenConfig c;
  c.poisson = {1.0, 30};
  c.strategy = Termination{1e-6};
  c.e0_ratio = 0.2;
  const auto rep = stage1_open_termination(c, solve_bne_open_termination(c));
  EXPECT_LT(rep.expected_efficiency.mean, 1e-5);
}

TEST(OpenCalibration, MeetsBudget) {
  auto c = earliest(2.0, 10, 3, 0.1);
  c.budget = 1.5;
  const auto cal = open_calibrate_b(c);
  EXPECT_NEAR(cal.report.expected_payment.mean, 1.5, 1e-12);
  const auto direct = stage1_open_earliest_n(c.with_reward(cal.b), solve_bne_open_earliest_n(c.with_reward(cal.b)));
  EXPECT_NEAR(direct.expected_payment.mean, 1.5, 1e-6);
  c.strategy = Termination{0.8};
  const auto term = open_calibrate_b(c);
  EXPECT_NEAR(term.report.expected_payment.mean, 1.5, 1e-9);
}
