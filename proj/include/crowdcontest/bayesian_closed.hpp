#pragma once

// Closed-system Bayesian contests: N contributors with i.i.d. joining times.
// Stage II finds the symmetric equilibrium effort as a function of joining
// time; Stage I scores the mechanism (expected utility, payment, efficiency)
// and calibrates the reward scale b to a budget.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "crowdcontest/contest.hpp"
#include "crowdcontest/errors.hpp"
#include "crowdcontest/numerics.hpp"
#include "crowdcontest/timing.hpp"

namespace crowdcontest::bayes {

struct EarliestN {
  std::size_t n = 1;
};
struct Termination {
  double T = 0.0;
};
struct Linear {
  double h = 0.0;
};
using Strategy = std::variant<EarliestN, Termination, Linear>;

struct BayesianConfig {
  std::size_t n_players = 1;
  Strategy strategy = EarliestN{1};
  double max_reward = 1.0;  // b
  double e0_ratio = 0.0;    // e0 / b
  double budget = 1.0;      // B
  timing::JoinTimeModel join_model = timing::JoinTimeModel::uniform(0.0, 1.0);
  timing::WeightFunction weight = timing::WeightFunction::constant(1.0);

  double nature_effort() const { return e0_ratio * max_reward; }

  void validate() const {
    if (n_players < 1) throw invalid_input("need at least one contributor");
    if (!(max_reward >= 0.0)) throw invalid_input("b must be nonnegative");
    if (!(e0_ratio >= 0.0)) throw invalid_input("e0/b must be nonnegative");
    if (const auto* s = std::get_if<EarliestN>(&strategy)) {
      if (s->n < 1 || s->n > n_players) throw invalid_input("earliest-n needs 1 <= n <= N");
    } else if (const auto* s = std::get_if<Termination>(&strategy)) {
      if (s->T < join_model.support_min() || (join_model.bounded() && s->T > join_model.support_max()))
        throw invalid_input("termination time outside the joining-time support");
    } else if (const auto* s = std::get_if<Linear>(&strategy)) {
      if (!(s->h >= 0.0)) throw invalid_input("decay rate h must be nonnegative");
    }
  }

  BayesianConfig with_reward(double b) const {
    BayesianConfig c = *this;
    c.max_reward = b;
    return c;
  }
};

struct BneOptions {
  std::size_t grid_size = 64;
  std::size_t mc_samples = 20'000;
  numerics::RngSeed seed{20240601};
  numerics::SolverSettings settings = numerics::fixed_point_defaults();
  double noise_floor = 1e-3;  // grid points below this fraction of the peak effort count as inactive
};

struct StageOneOptions {
  std::size_t mc_samples = 100'000;
  numerics::RngSeed seed{77};
  unsigned threads = 1;
};

struct TypeGrid {
  std::vector<double> times;
  std::vector<double> efforts;
  std::vector<double> rewards;        // b(t) at each grid time
  std::vector<double> foc_value;      // b(t) E[c/(c+e)^2] at the solution (1 where active)
  std::vector<double> foc_std_error;  // Monte Carlo std error of that value
  std::size_t iterations = 0;
  double residual = 0.0;

  // Piecewise linear between grid points, flat beyond either end.
  double effort_at(double t) const {
    if (t <= times.front()) return efforts.front();
    if (t >= times.back()) return efforts.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
    const double f = (t - times[k]) / (times[k + 1] - times[k]);
    return (1.0 - f) * efforts[k] + f * efforts[k + 1];
  }
};

struct StageOneReport {
  double expected_utility = 0.0;
  numerics::McEstimate expected_payment;
  numerics::McEstimate expected_efficiency;
  double calibrated_b = 0.0;
  double parameter = 0.0;
};

// ---------------------------------------------------------------------------
// Probabilities

inline double binomial_pmf(std::size_t k, std::size_t n, double p) {
  if (k > n) return 0.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  return std::exp(std::lgamma(nd + 1) - std::lgamma(kd + 1) - std::lgamma(nd - kd + 1) + kd * std::log(p) +
                  (nd - kd) * std::log1p(-p));
}

// Probability of ranking among the earliest n of N when each opponent joins
// earlier with probability p = F(t): at most n-1 of the N-1 opponents do.
inline double earliest_n_prob(double p, std::size_t N, std::size_t n) {
  if (!(p >= 0.0 && p <= 1.0)) throw invalid_input("earliest_n_prob: p must lie in [0, 1]");
  if (N < 1 || n < 1 || n > N) throw invalid_input("earliest_n_prob: need 1 <= n <= N");
  if (n == N) return 1.0;
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += binomial_pmf(j, N - 1, p);
  return std::min(1.0, s);
}

inline double effort_upper_bound(double b_t, double e0) {
  const double q = 0.25 * b_t;
  if (b_t <= 0.0) return 0.0;
  if (e0 <= q) return q;
  return q * b_t * e0 / ((e0 + q) * (e0 + q));
}

// ---------------------------------------------------------------------------
// Shared Stage-II kernel

namespace detail {

// Opponent types for every Monte Carlo draw, stored as grid positions so each
// iteration only interpolates: effort = (1 - frac) x[idx] + frac x[idx + 1].
struct OpponentDraws {
  std::size_t draws = 0;
  std::size_t per_draw = 0;
  std::vector<std::uint32_t> idx;
  std::vector<double> frac;

  void add(const std::vector<double>& grid, double t) {
    std::uint32_t k;
    double f;
    if (t <= grid.front()) {
      k = 0;
      f = 0.0;
    } else if (t >= grid.back()) {
      k = static_cast<std::uint32_t>(grid.size() - 2);
      f = 1.0;
    } else {
      const auto it = std::upper_bound(grid.begin(), grid.end(), t);
      k = static_cast<std::uint32_t>(it - grid.begin()) - 1;
      f = (t - grid[k]) / (grid[k + 1] - grid[k]);
    }
    idx.push_back(k);
    frac.push_back(f);
  }
};

// Best response at one grid point against the sampled aggregates c = e0 + E_-.
// Solves b E[c/(c+e)^2] = 1 by Newton from the left; the left side is convex
// and decreasing in e, so the iterates increase monotonically to the root.
inline double point_response(double b_t, std::span<const double> c, double warm) {
  if (b_t <= 0.0) return 0.0;
  const double n = static_cast<double>(c.size());
  double inv = 0.0;
  for (double x : c)
    if (x > 0.0) inv += 1.0 / x;
  if (b_t * inv / n <= 1.0) return 0.0;
  auto eval = [&](double e, double& slope) {
    double f = 0.0, d = 0.0;
    for (double x : c) {
      if (x <= 0.0) continue;
      const double y = 1.0 / (x + e);
      const double y2 = y * y;
      f += x * y2;
      d += x * y2 * y;
    }
    slope = -2.0 * b_t * d / n;
    return b_t * f / n - 1.0;
  };
  double e = std::clamp(warm, 0.0, b_t);
  double slope = 0.0;
  double f = eval(e, slope);
  if (f < 0.0) {
    e = std::max(0.0, e - f / slope);
    f = eval(e, slope);
  }
  for (int it = 0; it < 200; ++it) {
    const double step = -f / slope;
    e = std::min(e + step, b_t);
    if (std::abs(step) <= 1e-15 * (1.0 + e)) break;
    f = eval(e, slope);
    if (f <= 0.0) break;
  }
  return e;
}

inline TypeGrid solve_kernel(std::vector<double> times, std::vector<double> rewards, double e0,
                             const OpponentDraws& opp, std::vector<double> init,
                             const numerics::SolverSettings& settings, double noise_floor) {
  const std::size_t K = times.size();
  std::vector<double> c(opp.draws);
  auto aggregate = [&](std::span<const double> x) {
    for (std::size_t s = 0; s < opp.draws; ++s) {
      double acc = e0;
      const std::size_t base = s * opp.per_draw;
      for (std::size_t j = 0; j < opp.per_draw; ++j) {
        const std::uint32_t k = opp.idx[base + j];
        const double f = opp.frac[base + j];
        acc += f == 0.0 ? x[k] : (1.0 - f) * x[k] + f * x[k + 1];
      }
      c[s] = acc;
    }
  };
  auto map = [&](std::span<const double> x) {
    aggregate(x);
    std::vector<double> y(K);
    for (std::size_t k = 0; k < K; ++k) y[k] = point_response(rewards[k], c, x[k]);
    return y;
  };
  const auto fp = numerics::fixed_point_adaptive(map, std::move(init), settings);

  TypeGrid g;
  g.times = std::move(times);
  g.rewards = std::move(rewards);
  g.efforts = fp.x;
  g.iterations = fp.iterations;
  g.residual = fp.residual;
  aggregate(g.efforts);
  g.foc_value.assign(K, 0.0);
  g.foc_std_error.assign(K, 0.0);
  // Efforts this far below the peak are numerically zero; the expectation
  // there is dominated by rare tiny aggregates and is not checked.
  const double active_floor = noise_floor * *std::max_element(g.efforts.begin(), g.efforts.end());
  for (std::size_t k = 0; k < K; ++k) {
    numerics::RunningStats st;
    const double e = g.efforts[k];
    for (double x : c) st.add(x > 0.0 ? g.rewards[k] * x / ((x + e) * (x + e)) : 0.0);
    const auto est = st.estimate();
    g.foc_value[k] = est.mean;
    g.foc_std_error[k] = est.std_error;
    if (e > active_floor && est.std_error > 0.1 * est.mean)
      throw monte_carlo_noise("equilibrium condition too noisy at grid point " + std::to_string(k) +
                              "; increase mc_samples");
  }
  return g;
}

// Damping suited to the aggregated best-response map of N players.
inline numerics::SolverSettings damped_for(std::size_t n_players, numerics::SolverSettings s) {
  s.damping = std::min(s.damping, 2.0 / (static_cast<double>(n_players) + 1.0));
  return s;
}

inline std::vector<double> quantile_grid(const timing::JoinTimeModel& m, std::size_t K) {
  if (K < 2) throw invalid_input("type grid needs at least 2 points");
  const double q_top = m.bounded() ? 1.0 : 1.0 - 1e-6;
  std::vector<double> t;
  t.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double q = q_top * static_cast<double>(k) / static_cast<double>(K - 1);
    const double x = m.quantile(q);
    if (t.empty() || x > t.back()) t.push_back(x);
  }
  if (t.size() < 2) throw invalid_input("joining-time law is degenerate");
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage II

inline double reward_at(const BayesianConfig& cfg, double t) {
  if (const auto* s = std::get_if<EarliestN>(&cfg.strategy))
    return cfg.max_reward * earliest_n_prob(cfg.join_model.cdf(t), cfg.n_players, s->n);
  if (const auto* s = std::get_if<Linear>(&cfg.strategy)) return std::max(0.0, cfg.max_reward - s->h * t);
  const auto& term = std::get<Termination>(cfg.strategy);
  return t <= term.T ? cfg.max_reward : 0.0;
}

namespace detail {

inline TypeGrid solve_closed_grid(const BayesianConfig& cfg, const BneOptions& opt) {
  cfg.validate();
  auto times = quantile_grid(cfg.join_model, opt.grid_size);
  std::vector<double> rewards(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) rewards[k] = reward_at(cfg, times[k]);
  const double e0 = cfg.nature_effort();

  OpponentDraws opp;
  opp.draws = opt.mc_samples;
  opp.per_draw = cfg.n_players - 1;
  opp.idx.reserve(opp.draws * opp.per_draw);
  opp.frac.reserve(opp.draws * opp.per_draw);
  auto rng = numerics::make_stream(opt.seed);
  for (std::size_t s = 0; s < opp.draws; ++s)
    for (std::size_t j = 0; j < opp.per_draw; ++j) opp.add(times, cfg.join_model.sample_one(rng));

  std::vector<double> init(times.size());
  for (std::size_t k = 0; k < times.size(); ++k)
    init[k] = contest::symmetric_ne(cfg.n_players, rewards[k], e0);
  return solve_kernel(std::move(times), std::move(rewards), e0, opp, std::move(init),
                      damped_for(cfg.n_players, opt.settings), opt.noise_floor);
}

}  // namespace detail

inline TypeGrid solve_bne_earliest_n(const BayesianConfig& cfg, const BneOptions& opt = {}) {
  if (!std::holds_alternative<EarliestN>(cfg.strategy)) throw invalid_input("solve_bne_earliest_n: wrong strategy");
  return detail::solve_closed_grid(cfg, opt);
}

inline TypeGrid solve_bne_linear(const BayesianConfig& cfg, const BneOptions& opt = {}) {
  if (!std::holds_alternative<Linear>(cfg.strategy)) throw invalid_input("solve_bne_linear: wrong strategy");
  return detail::solve_closed_grid(cfg, opt);
}

// First grid time with zero effort, or the last grid time when everyone
// participates.
inline double participation_threshold(const TypeGrid& g) {
  for (std::size_t k = 0; k < g.times.size(); ++k)
    if (g.efforts[k] <= 0.0) return g.times[k];
  return g.times.back();
}

// Symmetric effort of contributors who joined before T when each opponent
// did so with probability p:
//   sum_k Binom(k; N-1, p) b (e0 + k e) / (e0 + (k+1) e)^2 = 1.
inline double termination_lhs(std::size_t N, double p, double b, double e0, double e) {
  double s = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double pk = binomial_pmf(k, N - 1, p);
    if (pk == 0.0) continue;
    const double kd = static_cast<double>(k);
    const double num = e0 + kd * e;
    if (num <= 0.0) continue;
    const double den = e0 + (kd + 1.0) * e;
    s += pk * b * num / (den * den);
  }
  return s;
}

inline double solve_bne_termination(std::size_t N, double p, double b, double e0,
                                    const numerics::SolverSettings& settings = {}) {
  if (N < 1) throw invalid_input("solve_bne_termination: N must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw invalid_input("solve_bne_termination: p must lie in [0, 1]");
  if (!(b >= 0.0) || !(e0 >= 0.0)) throw invalid_input("solve_bne_termination: b and e0 must be nonnegative");
  if (b <= 0.0) return 0.0;
  if (e0 == 0.0) {
    double e = 0.0;
    for (std::size_t k = 1; k < N; ++k) {
      const double kd = static_cast<double>(k);
      e += binomial_pmf(k, N - 1, p) * kd * b / ((kd + 1.0) * (kd + 1.0));
    }
    return e;
  }
  if (b <= e0) return 0.0;  // the left side starts at b/e0
  numerics::SolverSettings s = settings;
  s.abs_tol = std::min(s.abs_tol, 1e-14 * std::max(1.0, b));
  s.rel_tol = std::min(s.rel_tol, 1e-14);
  return numerics::bisect([&](double e) { return termination_lhs(N, p, b, e0, e) - 1.0; }, 0.0, b, s);
}

// ---------------------------------------------------------------------------
// Stage I

namespace detail {

template <class EffortFn>
double expected_utility_closed(const BayesianConfig& cfg, EffortFn&& effort, const std::vector<double>& extra_cuts,
                               double upper) {
  auto cuts = cfg.join_model.knots();
  const auto wb = cfg.weight.breakpoints();
  cuts.insert(cuts.end(), wb.begin(), wb.end());
  cuts.insert(cuts.end(), extra_cuts.begin(), extra_cuts.end());
  const double lo = cfg.join_model.support_min();
  double hi = std::min(upper, cfg.join_model.bounded() ? cfg.join_model.support_max()
                                                         : cfg.join_model.quantile(1.0 - 1e-12));
  return static_cast<double>(cfg.n_players) *
         timing::integrate([&](double t) { return cfg.weight(t) * effort(t) * cfg.join_model.pdf(t); }, lo, hi,
                           cuts, 4);
}

}  // namespace detail

// Earliest-n or linear Stage-I metrics at the configured b.
inline StageOneReport stage1_metrics_grid(const BayesianConfig& cfg, const TypeGrid& grid,
                                          const StageOneOptions& opt = {}) {
  const std::size_t N = cfg.n_players;
  const double b = cfg.max_reward;
  const double e0 = cfg.nature_effort();
  std::size_t n_paid = N;
  if (const auto* s = std::get_if<EarliestN>(&cfg.strategy)) n_paid = s->n;
  const bool linear = std::holds_alternative<Linear>(cfg.strategy);
  const double h = linear ? std::get<Linear>(cfg.strategy).h : 0.0;

  StageOneReport rep;
  rep.calibrated_b = b;
  rep.expected_utility = detail::expected_utility_closed(cfg, [&](double t) { return grid.effort_at(t); },
                                                         grid.times, std::numeric_limits<double>::infinity());
  auto sampler = [&](numerics::Rng& rng) {
    std::vector<double> t(N);
    for (auto& x : t) x = cfg.join_model.sample_one(rng);
    return t;
  };
  auto integrand = [&](std::vector<double> t) -> std::array<double, 2> {
    std::sort(t.begin(), t.end());
    double total = e0, util = 0.0, paid = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = grid.effort_at(t[i]);
      total += e;
      util += cfg.weight(t[i]) * e;
      if (linear) paid += std::max(0.0, b - h * t[i]) * e;
      else if (i < n_paid) paid += b * e;
    }
    if (total <= 0.0 || paid <= 0.0) return {0.0, 0.0};
    return {paid / total, util * total / paid};
  };
  const auto est = numerics::mc_expect_many<2>(sampler, integrand, opt.mc_samples, opt.seed, opt.threads);
  rep.expected_payment = est[0];
  rep.expected_efficiency = est[1];
  if (const auto* s = std::get_if<EarliestN>(&cfg.strategy)) rep.parameter = static_cast<double>(s->n);
  if (linear) rep.parameter = h;
  return rep;
}

inline StageOneReport stage1_metrics_earliest_n(const BayesianConfig& cfg, const TypeGrid& grid,
                                                const StageOneOptions& opt = {}) {
  if (!std::holds_alternative<EarliestN>(cfg.strategy)) throw invalid_input("stage1_metrics_earliest_n: wrong strategy");
  return stage1_metrics_grid(cfg, grid, opt);
}

// Closed forms for the termination strategy; no sampling involved.
inline StageOneReport stage1_metrics_termination(const BayesianConfig& cfg, double e_star) {
  const auto& term = std::get<Termination>(cfg.strategy);
  const std::size_t N = cfg.n_players;
  const double b = cfg.max_reward;
  const double e0 = cfg.nature_effort();
  const double p = cfg.join_model.cdf(term.T);
  const double mass = timing::weighted_mass(cfg.weight, cfg.join_model, cfg.join_model.support_min(), term.T);
  StageOneReport rep;
  rep.calibrated_b = b;
  rep.parameter = term.T;
  rep.expected_utility = e_star * static_cast<double>(N) * mass;
  double pay = 0.0;
  for (std::size_t k = 1; k <= N; ++k) {
    const double kd = static_cast<double>(k);
    const double den = e0 + kd * e_star;
    if (den > 0.0) pay += binomial_pmf(k, N, p) * b * kd * e_star / den;
  }
  rep.expected_payment = {pay, 0.0, 1};
  double eff = 0.0;
  if (p > 0.0 && b > 0.0) {
    eff = (e0 / (b * p) * (1.0 - std::pow(1.0 - p, static_cast<double>(N))) +
           static_cast<double>(N) * e_star / b) * mass;
  }
  rep.expected_efficiency = {eff, 0.0, 1};
  return rep;
}

inline double termination_effort(const BayesianConfig& cfg, const numerics::SolverSettings& settings = {}) {
  const auto& term = std::get<Termination>(cfg.strategy);
  return solve_bne_termination(cfg.n_players, cfg.join_model.cdf(term.T), cfg.max_reward, cfg.nature_effort(),
                               settings);
}

// Budget calibration. Earliest-n and termination scale linearly in b when
// e0 tracks b, so a single solve at b = 1 fixes the scale; the linear
// strategy is re-solved for every candidate b.
struct Calibration {
  double b = 0.0;
  StageOneReport report;
  TypeGrid grid;  // empty for termination
};

inline Calibration calibrate_b(const BayesianConfig& cfg, const BneOptions& bne = {}, const StageOneOptions& s1 = {},
                               double b_max = 1e6) {
  const double B = cfg.budget;
  if (!(B > 0.0)) throw infeasible_budget("budget must be positive");
  if (std::holds_alternative<Termination>(cfg.strategy)) {
    const auto unit = cfg.with_reward(1.0);
    const double e = termination_effort(unit, bne.settings);
    const auto rep = stage1_metrics_termination(unit, e);
    if (!(rep.expected_payment.mean > 0.0)) throw infeasible_budget("no payment at any reward scale");
    const double b = B / rep.expected_payment.mean;
    if (b > b_max) throw infeasible_budget("calibrated b exceeds b_max");
    Calibration out{b, stage1_metrics_termination(cfg.with_reward(b), termination_effort(cfg.with_reward(b), bne.settings)), {}};
    return out;
  }
  if (std::holds_alternative<EarliestN>(cfg.strategy)) {
    const auto unit = cfg.with_reward(1.0);
    auto grid = solve_bne_earliest_n(unit, bne);
    auto rep = stage1_metrics_grid(unit, grid, s1);
    if (!(rep.expected_payment.mean > 0.0)) throw infeasible_budget("no payment at any reward scale");
    const double b = B / rep.expected_payment.mean;
    if (b > b_max) throw infeasible_budget("calibrated b exceeds b_max");
    for (auto& e : grid.efforts) e *= b;
    for (auto& r : grid.rewards) r *= b;
    rep.expected_utility *= b;
    rep.expected_payment.mean *= b;
    rep.expected_payment.std_error *= b;
    rep.calibrated_b = b;
    return {b, rep, std::move(grid)};
  }
  // Linear decay: E[R](b) is increasing in b; bracket then bisect on log b.
  auto eval = [&](double b) {
    const auto c = cfg.with_reward(b);
    auto g = solve_bne_linear(c, bne);
    auto r = stage1_metrics_grid(c, g, s1);
    return Calibration{b, r, std::move(g)};
  };
  auto within = [&](const Calibration& c) {
    return std::abs(c.report.expected_payment.mean - B) <= std::max(1e-3 * B, 2.0 * c.report.expected_payment.std_error);
  };
  double lo = B, hi = B;
  Calibration at_lo = eval(lo);
  if (within(at_lo)) return at_lo;
  Calibration at_hi = at_lo;
  if (at_lo.report.expected_payment.mean > B) {
    do {
      hi = lo;
      at_hi = std::move(at_lo);
      lo *= 0.5;
      at_lo = eval(lo);
      if (within(at_lo)) return at_lo;
    } while (at_lo.report.expected_payment.mean > B && lo > 1e-12);
  } else {
    do {
      lo = hi;
      at_lo = std::move(at_hi);
      hi *= 2.0;
      if (hi > b_max) throw infeasible_budget("expected payment stays below the budget up to b_max");
      at_hi = eval(hi);
      if (within(at_hi)) return at_hi;
    } while (at_hi.report.expected_payment.mean < B);
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = std::sqrt(lo * hi);
    auto at_mid = eval(mid);
    if (within(at_mid)) return at_mid;
    if (at_mid.report.expected_payment.mean < B) lo = mid;
    else hi = mid;
  }
  throw no_convergence("calibrate_b: bisection did not meet the budget tolerance", {lo, hi}, hi - lo);
}

struct Sweep {
  double best_parameter = 0.0;
  std::vector<StageOneReport> reports;
};

inline Sweep pick_best(std::vector<StageOneReport> reports) {
  Sweep s;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : reports)
    if (r.expected_efficiency.mean > best) {
      best = r.expected_efficiency.mean;
      s.best_parameter = r.parameter;
    }
  s.reports = std::move(reports);
  return s;
}

inline Sweep optimal_n(const BayesianConfig& cfg, const std::vector<std::size_t>& n_range, const BneOptions& bne = {},
                       const StageOneOptions& s1 = {}, unsigned threads = 1) {
  if (n_range.empty()) throw invalid_input("optimal_n: empty range");
  auto reports = numerics::parallel_map(n_range.size(), [&](std::size_t i) {
    BayesianConfig c = cfg;
    c.strategy = EarliestN{n_range[i]};
    return calibrate_b(c, bne, s1).report;
  }, threads);
  return pick_best(std::move(reports));
}

inline Sweep optimal_T(const BayesianConfig& cfg, const std::vector<double>& T_grid, const BneOptions& bne = {},
                       unsigned threads = 1) {
  if (T_grid.empty()) throw invalid_input("optimal_T: empty grid");
  auto reports = numerics::parallel_map(T_grid.size(), [&](std::size_t i) {
    BayesianConfig c = cfg;
    c.strategy = Termination{T_grid[i]};
    return calibrate_b(c, bne).report;
  }, threads);
  return pick_best(std::move(reports));
}

inline Sweep optimal_h(const BayesianConfig& cfg, const std::vector<double>& h_grid, const BneOptions& bne = {},
                       const StageOneOptions& s1 = {}, unsigned threads = 1) {
  if (h_grid.empty()) throw invalid_input("optimal_h: empty grid");
  auto reports = numerics::parallel_map(h_grid.size(), [&](std::size_t i) {
    BayesianConfig c = cfg;
    c.strategy = Linear{h_grid[i]};
    return calibrate_b(c, bne, s1).report;
  }, threads);
  return pick_best(std::move(reports));
}

}  // namespace crowdcontest::bayes
