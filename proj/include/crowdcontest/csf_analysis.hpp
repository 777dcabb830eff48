#pragma once

// Two-player study of the generalized contest success function
//   r_i = b_i a_i e_i^{v_i} / (e0 + sum_j a_j e_j^{v_j})
// covering weight, exponent and reward discrimination and the symmetric game
// against a nature player.
//
// Conventions: u = w1/w2 is the requester's relative valuation of the
// earlier player, beta = b1/b2 the reward ratio, w the weight of player 1.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "crowdcontest/errors.hpp"
#include "crowdcontest/numerics.hpp"

namespace crowdcontest::csf {

struct GeneralCsfConfig {
  std::vector<double> weights_a;
  std::vector<double> exponents_v;
  std::vector<double> max_rewards_b;
  double nature_effort = 0.0;

  void validate() const {
    const std::size_t n = weights_a.size();
    if (n == 0 || exponents_v.size() != n || max_rewards_b.size() != n)
      throw invalid_input("general CSF: a, v and b must have equal nonzero length");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(weights_a[i] > 0.0)) throw invalid_input("general CSF: a_i must be positive");
      if (!(exponents_v[i] > 0.0 && exponents_v[i] <= 1.0)) throw invalid_input("general CSF: v_i must lie in (0, 1]");
      if (!(max_rewards_b[i] >= 0.0)) throw invalid_input("general CSF: b_i must be nonnegative");
    }
    if (!(nature_effort >= 0.0)) throw invalid_input("general CSF: e0 must be nonnegative");
  }
};

inline double general_share(const GeneralCsfConfig& c, const std::vector<double>& efforts, std::size_t i) {
  if (i >= c.weights_a.size()) throw index_error("general CSF: player index out of range");
  double denom = c.nature_effort;
  for (std::size_t j = 0; j < efforts.size(); ++j) denom += c.weights_a[j] * std::pow(efforts[j], c.exponents_v[j]);
  if (denom <= 0.0) return 0.0;
  return c.max_rewards_b[i] * c.weights_a[i] * std::pow(efforts[i], c.exponents_v[i]) / denom;
}

struct TwoPlayerResult {
  double e1 = 0.0;
  double e2 = 0.0;
  double efficiency = 0.0;
  double gain = std::numeric_limits<double>::quiet_NaN();  // NaN when not defined for the scheme
};

// Player 1 has priority a, player 2 priority 1, common reward b and exponent v.
inline TwoPlayerResult weight_discrim_ne(double a, double b, double v, double w1 = 1.0, double w2 = 1.0) {
  if (!(a > 0.0) || !(b > 0.0) || !(v > 0.0 && v <= 1.0))
    throw invalid_input("weight_discrim_ne: need a > 0, b > 0, v in (0, 1]");
  const double e = a * b * v / ((1.0 + a) * (1.0 + a));
  TwoPlayerResult r{e, e};
  r.efficiency = (w1 + w2) * e / b;  // the full reward b is paid
  r.gain = r.efficiency / ((w1 + w2) * v / (4.0));
  return r;
}

// Common reward b and priority, exponents v1 >= v2. Efforts satisfy
// e1 : e2 = v1 : v2; e2 is the root of the first-order condition of player 2.
inline TwoPlayerResult exponent_discrim_ne(double v1, double v2, double b, double w1 = 1.0, double w2 = 1.0,
                                           const numerics::SolverSettings& settings = {}) {
  if (!(v2 > 0.0 && v2 <= v1 && v1 <= 1.0)) throw invalid_input("exponent_discrim_ne: need 0 < v2 <= v1 <= 1");
  if (!(b > 0.0)) throw invalid_input("exponent_discrim_ne: b must be positive");
  const double rho = v1 / v2;
  const double rv = std::pow(rho, v1);
  // Strictly increasing in e after dividing the FOC by e^{v1+v2-1}.
  auto h = [&](double e) {
    return rv * rv * std::pow(e, v1 - v2 + 1.0) + std::pow(e, v2 - v1 + 1.0) + 2.0 * rv * e - b * v2 * rv;
  };
  numerics::SolverSettings s = settings;
  s.abs_tol = std::min(s.abs_tol, 1e-14);
  s.rel_tol = std::min(s.rel_tol, 1e-13);
  const double e2 = numerics::bisect(h, 0.0, 0.5 * b * v2 + 1e-12, s);
  TwoPlayerResult r{rho * e2, e2};
  r.efficiency = (w1 * r.e1 + w2 * r.e2) / b;
  return r;
}

// Closed-form NE when player 1 may earn b and player 2 may earn b/beta.
// Weights are w1 = 1 and w2 = 1/u.
inline TwoPlayerResult reward_discrim_ne(double beta, double v, double b, double u) {
  if (!(beta >= 1.0)) throw invalid_input("reward_discrim_ne: beta must be >= 1");
  if (!(u >= 1.0)) throw invalid_input("reward_discrim_ne: u must be >= 1");
  if (!(v > 0.0 && v <= 1.0)) throw invalid_input("reward_discrim_ne: v must lie in (0, 1]");
  if (!(b > 0.0)) throw invalid_input("reward_discrim_ne: b must be positive");
  const double bv = std::pow(beta, v);
  const double bv1 = bv * beta;
  TwoPlayerResult r;
  r.e1 = v * b * bv / ((bv + 1.0) * (bv + 1.0));
  r.e2 = r.e1 / beta;
  r.efficiency = v * (bv1 + bv / u) / ((1.0 + bv1) * (1.0 + bv));
  r.gain = 4.0 * (bv1 + bv / u) / ((1.0 + bv1) * (1.0 + bv) * (1.0 + 1.0 / u));
  return r;
}

inline double reward_discrim_payment(double beta, double v, double b) {
  const double bv = std::pow(beta, v);
  return b * (bv + 1.0 / beta) / (bv + 1.0);
}

// Asymptotic (u -> infinity) gain-maximizing ratio: the root of
// v beta^{2v+1} - beta^v - (1+v) = 0 on [1, 50].
inline double optimal_beta_gain_asymptotic(double v, const numerics::SolverSettings& settings = {}) {
  if (!(v > 0.0 && v <= 1.0)) throw invalid_input("optimal_beta_gain: v must lie in (0, 1]");
  auto f = [v](double beta) { return v * std::pow(beta, 2.0 * v + 1.0) - std::pow(beta, v) - (1.0 + v); };
  numerics::SolverSettings s = settings;
  s.abs_tol = std::min(s.abs_tol, 1e-13);
  s.rel_tol = std::min(s.rel_tol, 1e-13);
  return numerics::bisect(f, 1.0, 50.0, s);
}

inline double gain_log_derivative(double beta, double v, double u) {
  const double bv = std::pow(beta, v);
  const double bvm1 = bv / beta;
  const double bv1 = bv * beta;
  return (u * (v + 1.0) * bv + v * bvm1) / (u * bv1 + bv) - (v + 1.0) * bv / (1.0 + bv1) - v * bvm1 / (1.0 + bv);
}

// Gain-maximizing ratio for finite u: log grid on [1, 50], then bisection
// on d log G / d beta. Returns 1 when the gain already decreases at beta = 1
// and 50 when it still increases there.
inline double optimal_beta_gain(double v, double u, const numerics::SolverSettings& settings = {}) {
  if (std::isinf(u)) return optimal_beta_gain_asymptotic(v, settings);
  if (!(v > 0.0 && v <= 1.0)) throw invalid_input("optimal_beta_gain: v must lie in (0, 1]");
  if (!(u >= 1.0)) throw invalid_input("optimal_beta_gain: u must be >= 1");
  auto d = [&](double beta) { return gain_log_derivative(beta, v, u); };
  if (d(1.0) <= 1e-14) return 1.0;
  constexpr int grid = 400;
  double prev = 1.0;
  for (int k = 1; k <= grid; ++k) {
    const double beta = std::exp(std::log(50.0) * k / grid);
    if (d(beta) <= 0.0) {
      numerics::SolverSettings s = settings;
      s.abs_tol = std::min(s.abs_tol, 1e-13);
      return numerics::bisect(d, prev, beta, s);
    }
    prev = beta;
  }
  return 50.0;
}

// Reward-discrimination efficiency for u -> infinity (w = 1).
inline double asymptotic_efficiency(double beta, double v) {
  const double bv = std::pow(beta, v);
  return v * bv * beta / ((1.0 + bv * beta) * (1.0 + bv));
}

// Exponent maximizing the efficiency at fixed beta and u (u may be +inf).
inline double efficiency_maximizing_v(double beta, double u, double v_min = 1e-3) {
  auto eff = [&](double v) {
    return std::isinf(u) ? asymptotic_efficiency(beta, v) : reward_discrim_ne(beta, v, 1.0, u).efficiency;
  };
  return numerics::golden_section_max(eff, v_min, 1.0, 1e-10).x;
}

// Sign of d E / d v at v = 1 for u -> infinity, scaled to a polynomial-log form.
inline double efficiency_v_slope_at_one(double beta) {
  const double l = std::log(beta);
  return beta * beta + beta * beta * beta - beta * beta * beta * l + beta + l + 1.0;
}

// Reward ratio above which the efficiency is no longer maximized at v = 1:
// the smallest beta whose maximizing exponent falls below 1 - delta.
inline double efficiency_regime_threshold(double delta = 1e-4, double lo = 1.0, double hi = 20.0) {
  auto departed = [&](double beta) { return efficiency_maximizing_v(beta, std::numeric_limits<double>::infinity()) < 1.0 - delta; };
  if (departed(lo) || !departed(hi)) throw bracket_error(lo, hi, departed(lo), departed(hi));
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    (departed(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

struct NatureNe {
  double effort = 0.0;
  bool participates = true;
};

// Symmetric two-player NE against nature effort e0:
// (e0 + 2e^v)^2 = v b e^{v-1} (e0 + e^v).
inline NatureNe nature_symmetric_ne(double b, double e0, double v, const numerics::SolverSettings& settings = {}) {
  if (!(b > 0.0)) throw invalid_input("nature_symmetric_ne: b must be positive");
  if (!(e0 >= 0.0)) throw invalid_input("nature_symmetric_ne: e0 must be nonnegative");
  if (!(v > 0.0 && v <= 1.0)) throw invalid_input("nature_symmetric_ne: v must lie in (0, 1]");
  if (v == 1.0 && e0 >= b) return {0.0, false};
  auto g = [&](double e) {
    const double ev = std::pow(e, v);
    return v * b * std::pow(e, v - 1.0) * (e0 + ev) - (e0 + 2.0 * ev) * (e0 + 2.0 * ev);
  };
  // With v < 1 and e0 > 0 the root can sit far below b; walk down to it.
  double lo = 1e-14 * b;
  while (g(lo) <= 0.0 && lo > 1e-280) lo *= 1e-4;
  if (g(lo) <= 0.0) return {0.0, false};
  numerics::SolverSettings s = settings;
  s.abs_tol = std::min(s.abs_tol, 1e-3 * lo);
  s.rel_tol = std::min(s.rel_tol, 1e-13);
  return {numerics::bisect(g, lo, b, s), true};
}

inline double nature_efficiency(double b, double e0, double v, double u, double w = 1.0) {
  if (!(u > 0.0)) throw invalid_input("nature_efficiency: u must be positive");
  const auto ne = nature_symmetric_ne(b, e0, v);
  if (!ne.participates) return 0.0;
  const double ev = std::pow(ne.effort, v);
  return v * w * (1.0 + u) / (4.0 * u) * (1.0 + e0 / (e0 + 2.0 * ev));
}

struct SurfaceRow {
  double u;
  double beta;
  double v;
  double value;
};

// Gain and efficiency over a (u, beta, v) grid, rows in u-major order.
inline std::vector<SurfaceRow> reward_discrim_surface(const std::vector<double>& us, const std::vector<double>& betas,
                                                      const std::vector<double>& vs, bool gain,
                                                      unsigned threads = 1) {
  const std::size_t n = us.size() * betas.size() * vs.size();
  return numerics::parallel_map(n, [&](std::size_t idx) {
    const std::size_t iv = idx % vs.size();
    const std::size_t ib = (idx / vs.size()) % betas.size();
    const std::size_t iu = idx / (vs.size() * betas.size());
    const auto r = reward_discrim_ne(betas[ib], vs[iv], 1.0, us[iu]);
    return SurfaceRow{us[iu], betas[ib], vs[iv], gain ? r.gain : r.efficiency};
  }, threads);
}

}  // namespace crowdcontest::csf
