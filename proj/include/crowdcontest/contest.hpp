#pragma once

// Complete-information Tullock contest with a nature player: reward shares,
// payoffs, the unique pure Nash equilibrium, identical-reward closed forms,
// requester efficiency and the optimal reward vector for e0 = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "crowdcontest/errors.hpp"
#include "crowdcontest/numerics.hpp"

namespace crowdcontest::contest {

struct ContestConfig {
  std::vector<double> max_rewards;  // b_i
  double nature_effort = 0.0;       // e0
  double budget = 1.0;              // B

  std::size_t n_players() const { return max_rewards.size(); }

  void validate() const {
    if (max_rewards.empty()) throw invalid_input("contest needs at least one player");
    for (double b : max_rewards)
      if (!(b >= 0.0) || !std::isfinite(b)) throw invalid_input("max rewards must be finite and >= 0");
    if (!(nature_effort >= 0.0) || !std::isfinite(nature_effort))
      throw invalid_input("nature effort must be finite and >= 0");
  }
};

struct EffortProfile {
  std::vector<double> efforts;
  // Set when nobody exerts positive effort at the equilibrium (every b_i <= e0,
  // or a lone player facing no nature effort).
  bool degenerate = false;

  double total() const { return std::accumulate(efforts.begin(), efforts.end(), 0.0); }

  std::vector<std::size_t> participants() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < efforts.size(); ++i)
      if (efforts[i] > 0.0) idx.push_back(i);
    return idx;
  }
};

// Requester valuation per unit of effort, indexed in joining-time order.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      if (!(w_[i] >= 0.0)) throw invalid_input("weights must be nonnegative");
      if (i > 0 && w_[i] > w_[i - 1])
        throw invalid_input("weights must be nonincreasing in joining order");
    }
  }
  static WeightVector constant(std::size_t n, double w = 1.0) {
    return WeightVector(std::vector<double>(n, w));
  }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const { return w_; }
  double sum_first(std::size_t n) const {
    return std::accumulate(w_.begin(), w_.begin() + static_cast<std::ptrdiff_t>(std::min(n, w_.size())), 0.0);
  }

 private:
  std::vector<double> w_;
};

struct MechanismReport {
  double utility = 0.0;     // U = sum w_i e_i
  double payment = 0.0;     // R = sum of rewards
  double efficiency = 0.0;  // U / R, 0 when nothing is paid
  std::optional<double> gain;
};

inline void check_index(const ContestConfig& config, std::size_t i) {
  if (i >= config.n_players()) throw index_error("player index out of range");
}

// e_i b_i / (e0 + sum e); 0 when the denominator vanishes.
inline double csf_reward(const ContestConfig& config, const EffortProfile& profile, std::size_t i) {
  check_index(config, i);
  if (profile.efforts.size() != config.n_players())
    throw invalid_input("effort profile size does not match the contest");
  const double denom = config.nature_effort + profile.total();
  if (denom <= 0.0) return 0.0;
  return profile.efforts[i] * config.max_rewards[i] / denom;
}

inline double payoff(const ContestConfig& config, const EffortProfile& profile, std::size_t i) {
  return csf_reward(config, profile, i) - profile.efforts[i];
}

inline double best_response(const ContestConfig& config, double opponents_total, std::size_t i) {
  check_index(config, i);
  const double x = config.nature_effort + opponents_total;
  return std::max(std::sqrt(config.max_rewards[i] * x) - x, 0.0);
}

// e0 + E for a participant set with sum of reciprocal rewards `inv_sum`.
inline double aggregate_with_nature(std::size_t n, double inv_sum, double e0) {
  const double m = static_cast<double>(n) - 1.0;
  return (m + std::sqrt(m * m + 4.0 * e0 * inv_sum)) / (2.0 * inv_sum);
}

// Unique pure NE. Players are ranked by b; starting from everyone with b > 0,
// the group sharing the smallest b is dropped until every closed-form effort
// is nonnegative.
inline EffortProfile solve_ne(const ContestConfig& config) {
  config.validate();
  const std::size_t n_total = config.n_players();
  const double e0 = config.nature_effort;
  EffortProfile out;
  out.efforts.assign(n_total, 0.0);

  std::vector<std::size_t> order(n_total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return config.max_rewards[a] > config.max_rewards[b];
  });
  std::size_t n = 0;
  while (n < n_total && config.max_rewards[order[n]] > 0.0) ++n;

  while (n > 0) {
    double inv_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) inv_sum += 1.0 / config.max_rewards[order[k]];
    const double x = aggregate_with_nature(n, inv_sum, e0);
    bool feasible = true;
    for (std::size_t k = 0; k < n; ++k) {
      const double b = config.max_rewards[order[k]];
      if (x - x * x / b < 0.0) {
        feasible = false;
        break;
      }
    }
    if (feasible) {
      for (std::size_t k = 0; k < n; ++k) {
        const double b = config.max_rewards[order[k]];
        out.efforts[order[k]] = std::max(0.0, x - x * x / b);
      }
      break;
    }
    const double smallest = config.max_rewards[order[n - 1]];
    while (n > 0 && config.max_rewards[order[n - 1]] == smallest) --n;
  }
  out.degenerate = std::none_of(out.efforts.begin(), out.efforts.end(), [](double e) { return e > 0.0; });
  return out;
}

// NE effort of n players sharing reward b against nature effort e0.
inline double symmetric_ne(std::size_t n, double b, double e0) {
  if (n == 0) throw invalid_input("symmetric_ne: n must be positive");
  if (!(b >= 0.0)) throw invalid_input("symmetric_ne: b must be nonnegative");
  if (!(e0 >= 0.0)) throw invalid_input("symmetric_ne: e0 must be nonnegative");
  const double nn = static_cast<double>(n);
  const double m = nn - 1.0;
  const double e = (m * b - 2.0 * e0 * nn + std::sqrt(m * m * b * b + 4.0 * e0 * b * nn)) / (2.0 * nn * nn);
  return std::max(e, 0.0);
}

// Requester efficiency when the earliest n players share reward b and the
// rest get nothing; `weights` holds at least n entries.
inline double efficiency_identical(std::size_t n, double b, double e0, const WeightVector& weights) {
  if (n == 0) throw invalid_input("efficiency_identical: n must be positive");
  if (!(b > 0.0)) throw invalid_input("efficiency_identical: b must be positive");
  if (!(e0 >= 0.0)) throw invalid_input("efficiency_identical: e0 must be nonnegative");
  if (weights.size() < n) throw invalid_input("efficiency_identical: fewer weights than players");
  const double nn = static_cast<double>(n);
  const double m = nn - 1.0;
  return weights.sum_first(n) / (2.0 * nn * nn) * (m + std::sqrt(m * m + 4.0 * e0 * nn / b));
}

inline MechanismReport report(const ContestConfig& config, const EffortProfile& profile,
                              const WeightVector& weights) {
  if (weights.size() != config.n_players())
    throw invalid_input("report: weight vector size does not match the contest");
  MechanismReport r;
  for (std::size_t i = 0; i < config.n_players(); ++i) {
    r.utility += weights[i] * profile.efforts[i];
    r.payment += csf_reward(config, profile, i);
  }
  r.efficiency = r.payment > 0.0 ? r.utility / r.payment : 0.0;
  return r;
}

// Gain of rewarding only the earliest two when only they are valued.
inline double discrimination_gain_case2(std::size_t n_players) {
  if (n_players < 2) throw invalid_input("discrimination_gain_case2: need N >= 2");
  const double n = static_cast<double>(n_players);
  return n * n / (4.0 * (n - 1.0));
}

struct OptimalRewards {
  std::vector<double> rewards;    // b*, zero for excluded players
  std::size_t participants = 0;   // players with positive effort
  double utility = 0.0;           // sum w_i e_i at the NE
  double multiplier = 0.0;        // Lagrange multiplier (utility per unit budget)
};

namespace detail {

// Stationary reward shape for n rewarded players at a given multiplier, with
// the scale fixed by (n-1)/sum(1/b) = 1. `shift` is the self-consistent
// A = W - 2 sum w_k / b_k; returns empty when no consistent shape exists.
inline std::vector<double> reward_shape(std::span<const double> w, double multiplier,
                                        const numerics::SolverSettings& settings) {
  const std::size_t n = w.size();
  const double nn = static_cast<double>(n);
  const double w_total = std::accumulate(w.begin(), w.end(), 0.0);
  const double w_min = *std::min_element(w.begin(), w.end());
  auto shape_at = [&](double shift) {
    std::vector<double> b(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double rad = nn / (nn - 1.0) + (shift / (nn - 1.0) + w[k]) / multiplier;
      b[k] = std::sqrt(std::max(rad, 0.0));
    }
    return b;
  };
  auto consistency = [&](double shift) {
    const auto b = shape_at(shift);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (b[k] <= 0.0) {
        if (w[k] > 0.0) return std::numeric_limits<double>::infinity();
        continue;
      }
      s += w[k] / b[k];
    }
    return shift - w_total + 2.0 * s;
  };
  // Radicands stay positive above this shift. The consistency function is
  // convex in the shift; the stationary shape sits on its increasing branch.
  const double lo = -nn * multiplier - (nn - 1.0) * w_min;
  const double lo_eval = lo + 1e-12 * (1.0 + std::abs(lo));
  const double hi = w_total + 1.0;
  if (consistency(hi) < 0.0) return {};
  const auto valley = numerics::golden_section_max([&](double a) { return -consistency(a); }, lo_eval, hi, 1e-12);
  if (-valley.value > 0.0) return {};
  const double shift = numerics::bisect(consistency, valley.x, hi, settings);
  return shape_at(shift);
}

}  // namespace detail

// Reward vector maximizing sum w_i e_i at the NE (e0 = 0) subject to total
// payment B. For each candidate participant count n (the n earliest players)
// the Lagrange multiplier is located by bisection on the normalization
// (n-1)/sum(1/b) = 1; the shape is then scaled to the budget and accepted
// only if the full game's NE keeps exactly those n players active.
inline OptimalRewards optimal_reward_vector(const WeightVector& weights, double budget, std::size_t n_players,
                                            const numerics::SolverSettings& settings = {}) {
  if (n_players < 2) throw invalid_input("optimal_reward_vector: need N >= 2");
  if (weights.size() != n_players) throw invalid_input("optimal_reward_vector: weight size mismatch");
  if (!(budget > 0.0)) throw infeasible_budget("optimal_reward_vector: budget must be positive");

  std::optional<OptimalRewards> best;
  for (std::size_t n = n_players; n >= 2; --n) {
    std::vector<double> w(weights.values().begin(), weights.values().begin() + static_cast<std::ptrdiff_t>(n));
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) continue;
    auto normalization = [&](double mult) {
      const auto b = detail::reward_shape(w, mult, settings);
      if (b.empty()) return std::numeric_limits<double>::quiet_NaN();
      double inv = 0.0;
      for (double x : b) inv += x > 0.0 ? 1.0 / x : std::numeric_limits<double>::infinity();
      return inv - (static_cast<double>(n) - 1.0);
    };
    // Bracket the multiplier on a log scale; skip n when no sign change exists.
    double lo = 0.0;
    double hi = 0.0;
    double f_prev = std::numeric_limits<double>::quiet_NaN();
    double m_prev = 0.0;
    for (double m = 1e-8; m <= 1e8; m *= 2.0) {
      const double f = normalization(m);
      if (std::isfinite(f) && std::isfinite(f_prev) && (f > 0.0) != (f_prev > 0.0)) {
        lo = m_prev;
        hi = m;
        break;
      }
      if (std::isfinite(f)) {
        f_prev = f;
        m_prev = m;
      }
    }
    if (hi == 0.0) continue;
    numerics::SolverSettings tight = settings;
    tight.abs_tol = 1e-15;
    tight.rel_tol = 1e-13;
    double mult = 0.0;
    try {
      mult = numerics::bisect([&](double m) {
        const double f = normalization(m);
        return std::isfinite(f) ? f : 1.0;
      }, lo, hi, tight);
    } catch (const contest_error&) {
      continue;
    }
    auto shape = detail::reward_shape(w, mult, tight);
    if (shape.empty()) continue;

    std::vector<double> b(n_players, 0.0);
    std::copy(shape.begin(), shape.end(), b.begin());
    ContestConfig unit{b, 0.0, budget};
    const auto unit_profile = solve_ne(unit);
    double unit_pay = 0.0;
    for (std::size_t i = 0; i < n_players; ++i) unit_pay += csf_reward(unit, unit_profile, i);
    if (!(unit_pay > 0.0)) continue;
    const double scale = budget / unit_pay;
    for (double& x : b) x *= scale;

    ContestConfig cfg{b, 0.0, budget};
    const auto profile = solve_ne(cfg);
    if (profile.participants().size() != n) continue;  // individual rationality
    const auto rep = report(cfg, profile, weights);
    if (!best || rep.utility > best->utility) {
      best = OptimalRewards{b, n, rep.utility, rep.utility / budget};
    }
  }
  if (!best) {
    // A lone rewarded player facing no nature effort exerts nothing; the
    // budget is still formally spent.
    if (n_players >= 1) {
      std::vector<double> b(n_players, 0.0);
      b[0] = budget;
      best = OptimalRewards{b, 0, 0.0, 0.0};
    }
  }
  return *best;
}

}  // namespace crowdcontest::contest
