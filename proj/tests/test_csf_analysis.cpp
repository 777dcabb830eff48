#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "crowdcontest/contest.hpp"
#include "crowdcontest/csf_analysis.hpp"

using namespace crowdcontest;
using namespace crowdcontest::csf;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Best-response iteration on the general CSF with golden-section maximization
// of each payoff; independent of every closed form below.
std::vector<double> brute_ne(const GeneralCsfConfig& c) {
  std::vector<double> e(c.weights_a.size(), 0.1);
  for (int it = 0; it < 400; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      auto pay = [&](double x) {
        auto trial = e;
        trial[i] = x;
        return general_share(c, trial, i) - x;
      };
      const double hi = *std::max_element(c.max_rewards_b.begin(), c.max_rewards_b.end());
      const double x = numerics::golden_section_max(pay, 0.0, hi, 1e-13).x;
      change = std::max(change, std::abs(x - e[i]));
      e[i] = x;
    }
    if (change < 1e-12) break;
  }
  return e;
}

}  // namespace

TEST(WeightDiscrimination, Examples) {
  auto r = weight_discrim_ne(1, 1, 1);
  EXPECT_DOUBLE_EQ(r.e1, 0.25);
  EXPECT_DOUBLE_EQ(r.e2, 0.25);
  r = weight_discrim_ne(4, 1, 1);
  EXPECT_NEAR(r.e1, 0.16, 1e-15);
  EXPECT_LT(r.e1, 0.25);
  EXPECT_LT(weight_discrim_ne(1, 1, 1e-9).e1, 1e-9);
  EXPECT_THROW(weight_discrim_ne(0, 1, 1), invalid_input);
}

TEST(WeightDiscrimination, MatchesBruteForce) {
  for (double a : {0.5, 2.0, 4.0}) {
    for (double v : {0.5, 1.0}) {
      const auto e = brute_ne({{a, 1.0}, {v, v}, {1.0, 1.0}, 0.0});
      const auto r = weight_discrim_ne(a, 1.0, v);
      EXPECT_NEAR(e[0], r.e1, 1e-6);
      EXPECT_NEAR(e[1], r.e2, 1e-6);
    }
  }
}

TEST(WeightDiscrimination, EfficiencyPeaksWithoutDiscrimination) {
  double best_a = 0, best = -1;
  for (int k = 0; k <= 400; ++k) {
    const double a = 0.25 * std::pow(16.0, k / 400.0);
    const double eff = weight_discrim_ne(a, 1.0, 1.0).efficiency;
    if (eff > best) best = eff, best_a = a;
  }
  EXPECT_NEAR(best_a, 1.0, 1e-12);
}

TEST(ExponentDiscrimination, Examples) {
  auto r = exponent_discrim_ne(1, 1, 1);
  EXPECT_NEAR(r.e1, 0.25, 1e-12);
  EXPECT_NEAR(r.e2, 0.25, 1e-12);
  r = exponent_discrim_ne(1, 0.5, 1);
  EXPECT_NEAR(r.e2, 0.1209720638, 1e-9);
  EXPECT_NEAR(r.e1, 0.2419441275, 1e-9);
  EXPECT_THROW(exponent_discrim_ne(0.5, 1, 1), invalid_input);
}

TEST(ExponentDiscrimination, MatchesBruteForce) {
  const auto e = brute_ne({{1.0, 1.0}, {1.0, 0.5}, {1.0, 1.0}, 0.0});
  const auto r = exponent_discrim_ne(1.0, 0.5, 1.0);
  EXPECT_NEAR(e[0], r.e1, 1e-6);
  EXPECT_NEAR(e[1], r.e2, 1e-6);
}

TEST(ExponentDiscrimination, RaisingLowerExponentRaisesBothEfforts) {
  double prev1 = 0, prev2 = 0;
  for (int k = 0; k <= 16; ++k) {
    const double v2 = 0.1 + 0.05 * k;
    const auto r = exponent_discrim_ne(0.9, v2, 1.0);
    EXPECT_GT(r.e1, prev1);
    EXPECT_GT(r.e2, prev2);
    prev1 = r.e1;
    prev2 = r.e2;
  }
}

TEST(RewardDiscrimination, Examples) {
  auto r = reward_discrim_ne(1.0, 0.7, 2.0, 3.0);
  EXPECT_NEAR(r.e1, 0.7 * 2.0 / 4, 1e-15);
  EXPECT_NEAR(r.e2, 0.7 * 2.0 / 4, 1e-15);
  EXPECT_NEAR(r.gain, 1.0, 1e-15);
  r = reward_discrim_ne(2.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(r.e1, 2.0 / 9, 1e-15);
  EXPECT_NEAR(r.e2, 1.0 / 9, 1e-15);
}

TEST(RewardDiscrimination, MatchesContestCore) {
  for (double beta : {1.0, 1.3, 2.0, 5.0, 11.0}) {
    for (double b : {0.5, 1.0, 3.0}) {
      const auto r = reward_discrim_ne(beta, 1.0, b, 2.0);
      const contest::ContestConfig c{{b, b / beta}, 0.0};
      const auto p = contest::solve_ne(c);
      EXPECT_NEAR(r.e1, p.efforts[0], 1e-9);
      EXPECT_NEAR(r.e2, p.efforts[1], 1e-9);
      const auto rep = contest::report(c, p, contest::WeightVector({1.0, 0.5}));
      EXPECT_NEAR(reward_discrim_payment(beta, 1.0, b), rep.payment, 1e-12);
      EXPECT_NEAR(r.efficiency, rep.efficiency, 1e-12);
      EXPECT_LE(rep.payment, b + 1e-15);
    }
  }
}

TEST(RewardDiscrimination, MatchesBruteForceForConcaveExponent) {
  const auto e = brute_ne({{1.0, 1.0}, {0.6, 0.6}, {1.0, 1.0 / 1.8}, 0.0});
  const auto r = reward_discrim_ne(1.8, 0.6, 1.0, 1.0);
  EXPECT_NEAR(e[0], r.e1, 1e-6);
  EXPECT_NEAR(e[1], r.e2, 1e-6);
}

TEST(OptimalBeta, AsymptoticLandmarks) {
  const double b1 = optimal_beta_gain(1.0, kInf);
  EXPECT_NEAR(b1, 1.5214, 1e-3);
  EXPECT_NEAR(b1 * b1 * b1 - b1 - 2.0, 0.0, 1e-9);
  EXPECT_NEAR(optimal_beta_gain(0.5, kInf), 2.4798157, 1e-6);
}

TEST(OptimalBeta, AsymptoticMatchesDenseGrid) {
  for (double v : {0.5, 1.0}) {
    const double root = optimal_beta_gain(v, kInf);
    double best = -1, arg = 0;
    for (int k = 0; k <= 200000; ++k) {
      const double beta = 1.0 + 9.0 * k / 200000.0;
      const double g = reward_discrim_ne(beta, v, 1.0, 1e12).gain;
      if (g > best) best = g, arg = beta;
    }
    EXPECT_NEAR(arg, root, 1e-3);
  }
}

TEST(OptimalBeta, FiniteU) {
  EXPECT_EQ(optimal_beta_gain(1.0, 1.0), 1.0);
  for (double u : {2.0, 4.0, 20.0, 1e6}) {
    const double beta = optimal_beta_gain(1.0, u);
    const double g = reward_discrim_ne(beta, 1.0, 1.0, u).gain;
    for (double d : {-1e-3, 1e-3})
      EXPECT_GE(g, reward_discrim_ne(std::max(1.0, beta + d), 1.0, 1.0, u).gain - 1e-15);
  }
  EXPECT_NEAR(optimal_beta_gain(1.0, 1e9), optimal_beta_gain(1.0, kInf), 1e-4);
}

TEST(EfficiencyRegime, ThresholdLocatedFromMaximizer) {
  const double t = efficiency_regime_threshold();
  EXPECT_NEAR(t, 3.9026, 1e-2);
  // The slope function at v = 1 changes sign at the same place.
  const double root = numerics::bisect(efficiency_v_slope_at_one, 2.0, 6.0);
  EXPECT_NEAR(root, 3.9025690, 1e-6);
  EXPECT_EQ(efficiency_maximizing_v(3.0, kInf), 1.0);
  EXPECT_LT(efficiency_maximizing_v(6.0, kInf), 0.99);
}

// Gain is efficiency rescaled by a beta-free factor, so both peak at the same
// beta. The tension between them shows up across exponents: efficiency
// prefers v = 1 for moderate beta while the gain prefers smaller v.
TEST(Paradoxes, GainAndEfficiencyPullExponentApart) {
  const double u = 4.0;
  const double v = 1.0;
  double arg_g = 0, arg_e = 0, best_g = -1, best_e = -1;
  for (int k = 0; k <= 4000; ++k) {
    const double beta = 1.0 + 9.0 * k / 4000.0;
    const auto r = reward_discrim_ne(beta, v, 1.0, u);
    if (r.gain > best_g) best_g = r.gain, arg_g = beta;
    if (r.efficiency > best_e) best_e = r.efficiency, arg_e = beta;
  }
  EXPECT_EQ(arg_g, arg_e);
  const double beta = 2.0;
  EXPECT_EQ(efficiency_maximizing_v(beta, u), 1.0);
  EXPECT_GT(reward_discrim_ne(beta, 0.3, 1.0, u).gain, reward_discrim_ne(beta, 1.0, 1.0, u).gain);
}

TEST(Paradoxes, GainMonotoneInVAndU) {
  for (double beta = 1.1; beta < 10.0; beta += 0.37) {
    for (double u = 1.0; u < 30.0; u *= 1.7) {
      double prev = kInf;
      for (int k = 1; k <= 20; ++k) {
        const double v = 0.05 * k;
        const double g = reward_discrim_ne(beta, v, 1.0, u).gain;
        EXPECT_LT(g, prev);
        prev = g;
      }
    }
    for (double v : {0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0}) {
      double prev = -kInf;
      for (double u = 1.0; u < 30.0; u *= 1.7) {
        const double g = reward_discrim_ne(beta, v, 1.0, u).gain;
        EXPECT_GT(g, prev);
        prev = g;
      }
    }
  }
}

TEST(NaturePlayer, Examples) {
  EXPECT_NEAR(nature_symmetric_ne(1, 0, 1).effort, 0.25, 1e-12);
  EXPECT_NEAR(nature_symmetric_ne(1, 0.5, 1).effort, (std::sqrt(5.0) - 1) / 8, 1e-12);
  EXPECT_NEAR(nature_symmetric_ne(1, 0, 0.5).effort, 0.125, 1e-12);
  const auto out = nature_symmetric_ne(1, 1.2, 1);
  EXPECT_FALSE(out.participates);
  EXPECT_EQ(out.effort, 0.0);
}

TEST(NaturePlayer, MatchesSymmetricNeForLinearExponent) {
  for (double b : {0.5, 1.0, 4.0})
    for (double r : {0.0, 0.1, 0.4, 0.9})
      EXPECT_NEAR(nature_symmetric_ne(b, r * b, 1.0).effort, contest::symmetric_ne(2, b, r * b), 1e-11 * b);
}

TEST(NaturePlayer, EfficiencyLimits) {
  EXPECT_NEAR(nature_efficiency(1, 0, 1, 1), 0.5, 1e-12);
  EXPECT_NEAR(nature_efficiency(1, 0.999999, 1, 1), 1.0, 1e-3);
  EXPECT_NEAR(nature_efficiency(1e8, 1, 1, 1), 0.5, 1e-3);
  EXPECT_NEAR(nature_efficiency(1, 1e9, 0.5, 3), 0.5 * 4 / 6, 1e-3);
  EXPECT_EQ(nature_efficiency(1, 2, 1, 1), 0.0);
}

TEST(NaturePlayer, MonotoneInNatureEffort) {
  for (double v : {0.3, 0.7, 1.0}) {
    double prev_e = kInf, prev_eff = -kInf;
    for (double e0 = 0.0; e0 < 0.95; e0 += 0.05) {
      const double e = nature_symmetric_ne(1.0, e0, v).effort;
      const double eff = nature_efficiency(1.0, e0, v, 2.0);
      EXPECT_LT(e, prev_e);
      EXPECT_GT(eff, prev_eff);
      prev_e = e;
      prev_eff = eff;
    }
  }
}

TEST(NaturePlayer, EfficiencyMatchesDirectRatio) {
  const double b = 1.3, e0 = 0.4, v = 0.6, u = 2.5;
  const double e = nature_symmetric_ne(b, e0, v).effort;
  const double ev = std::pow(e, v);
  const double payment = b * 2 * ev / (e0 + 2 * ev);
  const double utility = e + e / u;
  EXPECT_NEAR(nature_efficiency(b, e0, v, u), utility / payment, 1e-10);
  const auto brute = brute_ne({{1.0, 1.0}, {v, v}, {b, b}, e0});
  EXPECT_NEAR(brute[0], e, 1e-6);
}

TEST(Surface, LayoutAndValues) {
  const auto rows = reward_discrim_surface({1.0, 4.0}, {1.0, 2.0, 3.0}, {0.5, 1.0}, true, 2);
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[0].u, 1.0);
  EXPECT_EQ(rows[0].beta, 1.0);
  EXPECT_EQ(rows[1].v, 1.0);
  EXPECT_NEAR(rows[0].value, 1.0, 1e-15);
  EXPECT_NEAR(rows[11].value, reward_discrim_ne(3.0, 1.0, 1.0, 4.0).gain, 1e-15);
}
