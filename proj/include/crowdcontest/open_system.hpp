#pragma once

// Open system: contributors arrive as a Poisson stream of rate lambda,
// truncated at M arrivals for the earliest-n solver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "crowdcontest/bayesian_closed.hpp"
#include "crowdcontest/errors.hpp"
#include "crowdcontest/numerics.hpp"
#include "crowdcontest/timing.hpp"

namespace crowdcontest::open_system {

using bayes::EarliestN;
using bayes::StageOneOptions;
using bayes::StageOneReport;
using bayes::Termination;
using bayes::TypeGrid;

using OpenStrategy = std::variant<EarliestN, Termination>;

struct OpenConfig {
  timing::PoissonModel poisson;
  OpenStrategy strategy = EarliestN{1};
  double max_reward = 1.0;
  double e0_ratio = 0.0;
  double budget = 1.0;
  timing::WeightFunction weight = timing::WeightFunction::constant(1.0);

  double nature_effort() const { return e0_ratio * max_reward; }

  void validate() const {
    poisson.validate();
    if (!(max_reward >= 0.0)) throw invalid_input("b must be nonnegative");
    if (!(e0_ratio >= 0.0)) throw invalid_input("e0/b must be nonnegative");
    if (const auto* s = std::get_if<EarliestN>(&strategy)) {
      if (s->n < 1 || s->n > poisson.truncation) throw invalid_input("earliest-n needs 1 <= n <= M");
    } else if (!(std::get<Termination>(strategy).T > 0.0)) {
      throw invalid_input("termination time must be positive");
    }
  }

  OpenConfig with_reward(double b) const {
    OpenConfig c = *this;
    c.max_reward = b;
    return c;
  }
};

inline double open_earliest_n_prob(double rate, double s, std::size_t n) {
  if (!(rate > 0.0) || !(s >= 0.0) || n < 1) throw invalid_input("open_earliest_n_prob: need rate > 0, s >= 0, n >= 1");
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += timing::poisson_pmf_mean(rate * s, static_cast<long long>(k));
  return std::min(1.0, acc);
}

// ---------------------------------------------------------------------------
// Earliest-n

inline double open_reward_at(const OpenConfig& c, double s) {
  return c.max_reward * open_earliest_n_prob(c.poisson.rate, s, std::get<EarliestN>(c.strategy).n);
}

inline TypeGrid solve_bne_open_earliest_n(const OpenConfig& c, const bayes::BneOptions& opt = {}) {
  c.validate();
  if (!std::holds_alternative<EarliestN>(c.strategy)) throw invalid_input("solve_bne_open_earliest_n: wrong strategy");
  if (opt.grid_size < 2) throw invalid_input("type grid needs at least 2 points");
  const std::size_t M = c.poisson.truncation;
  const double lam = c.poisson.rate;
  const double s_max = (static_cast<double>(M) + 8.0 * std::sqrt(static_cast<double>(M))) / lam;
  const std::size_t K = opt.grid_size;
  std::vector<double> times(K), rewards(K), init(K);
  const double e0 = c.nature_effort();
  for (std::size_t k = 0; k < K; ++k) {
    times[k] = s_max * static_cast<double>(k) / static_cast<double>(K - 1);
    rewards[k] = open_reward_at(c, times[k]);
    init[k] = contest::symmetric_ne(M, rewards[k], e0);
  }

  bayes::detail::OpponentDraws opp;
  opp.draws = opt.mc_samples;
  opp.per_draw = M - 1;
  opp.idx.reserve(opp.draws * opp.per_draw);
  opp.frac.reserve(opp.draws * opp.per_draw);
  auto rng = numerics::make_stream(opt.seed);
  for (std::size_t d = 0; d < opp.draws; ++d)
    for (double s : timing::sample_arrival_sequence(c.poisson, rng, M - 1)) opp.add(times, s);

  return bayes::detail::solve_kernel(std::move(times), std::move(rewards), e0, opp, std::move(init),
                                     bayes::detail::damped_for(M, opt.settings), opt.noise_floor);
}

inline StageOneReport stage1_open_earliest_n(const OpenConfig& c, const TypeGrid& grid,
                                             const StageOneOptions& opt = {}) {
  const std::size_t M = c.poisson.truncation;
  const std::size_t n = std::get<EarliestN>(c.strategy).n;
  const double b = c.max_reward, e0 = c.nature_effort();
  auto sampler = [&](numerics::Rng& rng) { return timing::sample_arrival_sequence(c.poisson, rng, M); };
  auto integrand = [&](const std::vector<double>& s) -> std::array<double, 3> {
    double total = e0, util = 0.0, paid = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const double e = grid.effort_at(s[i]);
      total += e;
      util += c.weight(s[i]) * e;
      if (i < n) paid += b * e;
    }
    if (total <= 0.0 || paid <= 0.0) return {util, 0.0, 0.0};
    return {util, paid / total, util * total / paid};
  };
  const auto est = numerics::mc_expect_many<3>(sampler, integrand, opt.mc_samples, opt.seed, opt.threads);
  StageOneReport rep;
  rep.expected_utility = est[0].mean;
  rep.expected_payment = est[1];
  rep.expected_efficiency = est[2];
  rep.calibrated_b = b;
  rep.parameter = static_cast<double>(n);
  return rep;
}

// ---------------------------------------------------------------------------
// Termination

// Probability that a contributor who arrived before T meets k others.
inline double open_termination_prob(double rate, double T, std::size_t k) {
  const double m = rate * T;
  if (!(m > 0.0)) throw invalid_input("open_termination_prob: lambda*T must be positive");
  const double kd = static_cast<double>(k);
  return std::exp(-m + (kd + 1.0) * std::log(m) - std::lgamma(kd + 2.0)) / -std::expm1(-m);
}

namespace detail {

// Calls fn(k, P(k)) until the remaining mass drops below 1e-10.
template <class Fn>
void for_each_meeting(double rate, double T, Fn&& fn) {
  double seen = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double p = open_termination_prob(rate, T, k);
    fn(k, p);
    seen += p;
    if (1.0 - seen < 1e-10 && static_cast<double>(k) > rate * T) break;
    if (k > 100000) throw no_convergence("open termination: tail never fell below 1e-10", {seen}, 1.0 - seen);
  }
}

template <class Fn>
void for_each_count(double mean, Fn&& fn) {
  double seen = 0.0;
  for (std::size_t m = 0;; ++m) {
    const double p = timing::poisson_pmf_mean(mean, static_cast<long long>(m));
    fn(m, p);
    seen += p;
    if (1.0 - seen < 1e-12 && static_cast<double>(m) > mean) break;
    if (m > 100000) throw no_convergence("poisson sum: tail never fell below 1e-12", {seen}, 1.0 - seen);
  }
}

}  // namespace detail

inline double open_termination_lhs(double rate, double T, double b, double e0, double e) {
  double s = 0.0;
  detail::for_each_meeting(rate, T, [&](std::size_t k, double p) {
    const double kd = static_cast<double>(k);
    const double num = e0 + kd * e;
    if (num <= 0.0) return;
    const double den = e0 + (kd + 1.0) * e;
    s += p * b * num / (den * den);
  });
  return s;
}

inline double solve_bne_open_termination(double rate, double T, double b, double e0,
                                         const numerics::SolverSettings& settings = {}) {
  if (!(b >= 0.0) || !(e0 >= 0.0)) throw invalid_input("solve_bne_open_termination: b and e0 must be nonnegative");
  if (b == 0.0) return 0.0;
  if (e0 == 0.0) {
    double e = 0.0;
    detail::for_each_meeting(rate, T, [&](std::size_t k, double p) {
      const double kd = static_cast<double>(k);
      e += p * kd * b / ((kd + 1.0) * (kd + 1.0));
    });
    return e;
  }
  if (b <= e0) return 0.0;
  numerics::SolverSettings s = settings;
  s.abs_tol = std::min(s.abs_tol, 1e-14 * std::max(1.0, b));
  s.rel_tol = std::min(s.rel_tol, 1e-14);
  return numerics::bisect([&](double e) { return open_termination_lhs(rate, T, b, e0, e) - 1.0; }, 0.0, b, s);
}

inline double solve_bne_open_termination(const OpenConfig& c, const numerics::SolverSettings& settings = {}) {
  c.validate();
  return solve_bne_open_termination(c.poisson.rate, std::get<Termination>(c.strategy).T, c.max_reward,
                                    c.nature_effort(), settings);
}

inline double open_termination_conditional_eff(std::size_t m, double e_star, double b, double T,
                                               const timing::WeightFunction& w, double e0) {
  if (!(b > 0.0) || !(T > 0.0)) throw invalid_input("open_termination_conditional_eff: b and T must be positive");
  if (m == 0) return 0.0;
  return (e0 + static_cast<double>(m) * e_star) / (b * T) * timing::weight_integral(w, 0.0, T);
}

inline StageOneReport stage1_open_termination(const OpenConfig& c, double e_star) {
  const double T = std::get<Termination>(c.strategy).T;
  const double lam = c.poisson.rate, b = c.max_reward, e0 = c.nature_effort();
  const double wint = timing::weight_integral(c.weight, 0.0, T);
  StageOneReport rep;
  rep.calibrated_b = b;
  rep.parameter = T;
  rep.expected_utility = e_star * lam * wint;
  double pay = 0.0, eff = 0.0;
  detail::for_each_count(lam * T, [&](std::size_t m, double p) {
    if (m == 0) return;
    const double md = static_cast<double>(m);
    const double den = e0 + md * e_star;
    if (den > 0.0) pay += p * b * md * e_star / den;
    eff += p * open_termination_conditional_eff(m, e_star, b, T, c.weight, e0);
  });
  rep.expected_payment = {pay, 0.0, 1};
  rep.expected_efficiency = {eff, 0.0, 1};
  return rep;
}

// ---------------------------------------------------------------------------
// Calibration and the optimal termination time

struct OpenCalibration {
  double b = 0.0;
  StageOneReport report;
  TypeGrid grid;  // empty for termination
};

// Both strategies scale linearly in b when e0 tracks b.
inline OpenCalibration open_calibrate_b(const OpenConfig& c, const bayes::BneOptions& bne = {},
                                        const StageOneOptions& s1 = {}, double b_max = 1e6) {
  if (!(c.budget > 0.0)) throw infeasible_budget("budget must be positive");
  const auto unit = c.with_reward(1.0);
  OpenCalibration out;
  if (std::holds_alternative<Termination>(c.strategy)) {
    const auto rep = stage1_open_termination(unit, solve_bne_open_termination(unit, bne.settings));
    if (!(rep.expected_payment.mean > 0.0)) throw infeasible_budget("no payment at any reward scale");
    out.b = c.budget / rep.expected_payment.mean;
    if (out.b > b_max) throw infeasible_budget("calibrated b exceeds b_max");
    const auto scaled = c.with_reward(out.b);
    out.report = stage1_open_termination(scaled, solve_bne_open_termination(scaled, bne.settings));
    return out;
  }
  out.grid = solve_bne_open_earliest_n(unit, bne);
  out.report = stage1_open_earliest_n(unit, out.grid, s1);
  if (!(out.report.expected_payment.mean > 0.0)) throw infeasible_budget("no payment at any reward scale");
  out.b = c.budget / out.report.expected_payment.mean;
  if (out.b > b_max) throw infeasible_budget("calibrated b exceeds b_max");
  for (auto& e : out.grid.efforts) e *= out.b;
  for (auto& r : out.grid.rewards) r *= out.b;
  out.report.expected_utility *= out.b;
  out.report.expected_payment.mean *= out.b;
  out.report.expected_payment.std_error *= out.b;
  out.report.calibrated_b = out.b;
  return out;
}

struct OpenOptimalT {
  double T = 0.0;
  double efficiency = 0.0;
  std::vector<StageOneReport> curve;  // one entry per grid point
};

inline OpenOptimalT open_optimal_T(const OpenConfig& c, const std::vector<double>& T_grid,
                                   const numerics::SolverSettings& settings = {}, unsigned threads = 1) {
  if (T_grid.empty()) throw invalid_input("open_optimal_T: empty grid");
  auto at = [&](double T) {
    OpenConfig x = c;
    x.strategy = Termination{T};
    return open_calibrate_b(x, {.settings = settings}).report;
  };
  OpenOptimalT out;
  out.curve = numerics::parallel_map(T_grid.size(), [&](std::size_t i) { return at(T_grid[i]); }, threads);
  std::size_t best = 0;
  for (std::size_t i = 1; i < T_grid.size(); ++i)
    if (out.curve[i].expected_efficiency.mean > out.curve[best].expected_efficiency.mean) best = i;
  const double lo = best > 0 ? T_grid[best - 1] : T_grid[best];
  const double hi = best + 1 < T_grid.size() ? T_grid[best + 1] : T_grid[best];
  out.T = T_grid[best];
  out.efficiency = out.curve[best].expected_efficiency.mean;
  if (hi > lo) {
    const auto g = numerics::golden_section_max([&](double T) { return at(T).expected_efficiency.mean; }, lo, hi,
                                                1e-6 * hi);
    if (g.value > out.efficiency) {
      out.T = g.x;
      out.efficiency = g.value;
    }
  }
  return out;
}

}  // namespace crowdcontest::open_system
