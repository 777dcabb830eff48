// Walks the main entry points on a small closed crowd and a Poisson stream.

#include <cstdio>

#include "crowdcontest/crowdcontest.hpp"

using namespace crowdcontest;

int main() {
  // Complete information: 5 identical contributors, nature effort 0.2b.
  const double e = contest::symmetric_ne(5, 1.0, 0.2);
  std::printf("complete info: e* = %.6f, efficiency = %.6f\n", e,
              contest::efficiency_identical(5, 1.0, 0.2, contest::WeightVector::constant(5, 1.0)));

  // Closed system, uniform joining over six hours, earliest 4 of 10 rewarded.
  bayes::BayesianConfig cfg;
  cfg.n_players = 10;
  cfg.strategy = bayes::EarliestN{4};
  cfg.e0_ratio = 0.2;
  cfg.budget = 1.0;
  cfg.join_model = timing::JoinTimeModel::uniform(0.0, 6.0);
  cfg.weight = timing::presets::clock_step();

  bayes::BneOptions bne;
  bne.grid_size = 32;
  const auto cal = bayes::calibrate_b(cfg, bne);
  std::printf("earliest-4: b = %.4f, efficiency = %.4f +- %.4f, cutoff t = %.3f\n", cal.b,
              cal.report.expected_efficiency.mean, cal.report.expected_efficiency.std_error,
              bayes::participation_threshold(cal.grid));
  for (std::size_t k = 0; k < cal.grid.times.size(); k += 8)
    std::printf("  t = %.3f  effort = %.5f  reward = %.4f\n", cal.grid.times[k], cal.grid.efforts[k],
                cal.grid.rewards[k]);

  // Same crowd under a termination time of two hours.
  cfg.strategy = bayes::Termination{2.0};
  const auto term = bayes::calibrate_b(cfg);
  std::printf("termination T=2: b = %.4f, efficiency = %.4f\n", term.b, term.report.expected_efficiency.mean);

  // Open system: arrivals at rate 4, best termination time on a coarse grid.
  open_system::OpenConfig oc;
  oc.poisson = {4.0, 30};
  oc.strategy = bayes::Termination{1.0};
  oc.e0_ratio = 0.2;
  oc.weight = timing::presets::normalized_step();
  std::vector<double> Ts;
  for (int k = 1; k <= 20; ++k) Ts.push_back(0.15 * k);
  const auto best = open_system::open_optimal_T(oc, Ts);
  std::printf("open termination: T* = %.3f, efficiency = %.4f\n", best.T, best.efficiency);
}
