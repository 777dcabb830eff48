#pragma once

// Deterministic numerical kernel shared by the solvers: seeded random
// streams, Monte Carlo expectations, bracketed root finding, damped
// fixed-point iteration and golden-section maximization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "crowdcontest/errors.hpp"

namespace crowdcontest::numerics {

struct RngSeed {
  std::uint64_t value = 0;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream for (seed, stream index). Chunked Monte Carlo uses the
// chunk index as the stream index.
inline Rng make_stream(RngSeed seed, std::uint64_t stream = 0) {
  std::seed_seq seq{splitmix64(seed.value), splitmix64(seed.value ^ 0x5bd1e995ULL),
                    splitmix64(stream + 0x632be59bd9b4e019ULL)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // standard error of the mean
  std::size_t samples = 0;
};

// Welford accumulator; merge() uses the pairwise update so chunk results can
// be combined in a fixed order.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double delta = o.mean_ - mean_;
    mean_ += delta * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

  McEstimate estimate() const {
    McEstimate e;
    e.mean = mean_;
    e.samples = n_;
    e.std_error = n_ > 1 ? std::sqrt(std::max(variance(), 0.0) / static_cast<double>(n_)) : 0.0;
    return e;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct SolverSettings {
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  std::size_t max_iter = 10'000;
  double damping = 0.5;

  void validate() const {
    if (!(abs_tol > 0.0)) throw invalid_input("abs_tol must be positive");
    if (!(rel_tol >= 0.0)) throw invalid_input("rel_tol must be nonnegative");
    if (!(damping > 0.0 && damping <= 1.0)) throw invalid_input("damping must lie in (0, 1]");
    if (max_iter == 0) throw invalid_input("max_iter must be positive");
  }
};

// Vector fixed points are held to 1e-7; scalar roots keep the 1e-9 default.
inline SolverSettings fixed_point_defaults() {
  SolverSettings s;
  s.abs_tol = 1e-7;
  s.rel_tol = 0.0;
  return s;
}

// Thread count from CROWDCONTEST_THREADS, else the hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("CROWDCONTEST_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Evaluates fn(i) for i in [0, n) on up to `threads` workers and returns the
// results in index order. The lowest-index exception is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, Fn&& fn, unsigned threads = 1)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out(n);
  std::vector<std::exception_ptr> errors(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// Bracketed bisection. Stops when the bracket is narrower than
// abs_tol + rel_tol*|x| or an exact zero is hit; every step keeps a sign
// change inside [lo, hi].
template <class F>
double bisect(F&& f, double lo, double hi, const SolverSettings& settings = {}) {
  settings.validate();
  if (lo > hi) std::swap(lo, hi);
  double f_lo = f(lo);
  double f_hi = f(hi);
  if (!std::isfinite(f_lo) || !std::isfinite(f_hi))
    throw numerical_error("bisect: non-finite function value at bracket endpoint");
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo > 0.0) == (f_hi > 0.0)) throw bracket_error(lo, hi, f_lo, f_hi);
  for (std::size_t it = 0; it < settings.max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= settings.abs_tol + settings.rel_tol * std::abs(mid)) return mid;
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  throw no_convergence("bisect: max_iter reached", {0.5 * (lo + hi)}, hi - lo);
}

struct FixedPointResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  double residual = 0.0;                  // ||x - map(x)||_inf at the returned x
  std::vector<double> residual_history;   // one entry per map evaluation
};

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Damped iteration x <- (1 - damping) x + damping map(x) until
// ||x - map(x)||_inf <= abs_tol + rel_tol ||x||_inf.
template <class Map>
FixedPointResult fixed_point(Map&& map, std::vector<double> init,
                             const SolverSettings& settings = fixed_point_defaults()) {
  settings.validate();
  FixedPointResult res;
  std::vector<double> x = std::move(init);
  for (std::size_t it = 0;; ++it) {
    std::vector<double> mx = map(std::span<const double>(x));
    if (mx.size() != x.size()) throw invalid_input("fixed_point: map changed the dimension");
    double scale = 0.0;
    for (double v : x) {
      if (!std::isfinite(v)) throw numerical_error("fixed_point: non-finite iterate");
      scale = std::max(scale, std::abs(v));
    }
    const double r = sup_distance(x, mx);
    res.residual_history.push_back(r);
    if (r <= settings.abs_tol + settings.rel_tol * scale) {
      res.x = std::move(x);
      res.iterations = it;
      res.residual = r;
      return res;
    }
    if (it >= settings.max_iter)
      throw no_convergence("fixed_point: max_iter reached", std::move(x), r);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = (1.0 - settings.damping) * x[i] + settings.damping * mx[i];
  }
}

// Same iteration, but the damping is halved (restarting from the best
// iterate seen) when the residual has not reached a new minimum within
// `patience` steps, or jumps above 100 times that minimum. Aggregated
// best-response maps of many players overshoot badly at a fixed damping of 0.5.
template <class Map>
FixedPointResult fixed_point_adaptive(Map&& map, std::vector<double> init,
                                      const SolverSettings& settings = fixed_point_defaults(),
                                      std::size_t patience = 25, double min_damping = 1e-4) {
  settings.validate();
  FixedPointResult res;
  double damping = settings.damping;
  std::vector<double> x = std::move(init);
  std::vector<double> best_x = x;
  double best_r = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t it = 0;; ++it) {
    std::vector<double> mx = map(std::span<const double>(x));
    if (mx.size() != x.size()) throw invalid_input("fixed_point: map changed the dimension");
    double scale = 0.0;
    for (double v : x) {
      if (!std::isfinite(v)) throw numerical_error("fixed_point: non-finite iterate");
      scale = std::max(scale, std::abs(v));
    }
    const double r = sup_distance(x, mx);
    res.residual_history.push_back(r);
    if (r <= settings.abs_tol + settings.rel_tol * scale) {
      res.x = std::move(x);
      res.iterations = it;
      res.residual = r;
      return res;
    }
    if (it >= settings.max_iter) throw no_convergence("fixed_point: max_iter reached", std::move(best_x), best_r);
    if (r < best_r) {
      best_r = r;
      best_x = x;
      stale = 0;
    } else {
      ++stale;
    }
    if (stale >= patience || r > 100.0 * best_r) {
      damping *= 0.5;
      if (damping < min_damping)
        throw no_convergence("fixed_point: damping exhausted", std::move(best_x), best_r);
      x = best_x;
      stale = 0;
      continue;
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1.0 - damping) * x[i] + damping * mx[i];
  }
}

struct GoldenResult {
  double x = 0.0;
  double value = 0.0;
};

// Golden-section search for the maximum of a unimodal f on [lo, hi].
template <class F>
GoldenResult golden_section_max(F&& f, double lo, double hi, double tol = 1e-9,
                                std::size_t max_iter = 500) {
  constexpr double inv_phi = 0.6180339887498949;
  const double a0 = lo;
  const double b0 = hi;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  for (std::size_t it = 0; it < max_iter && (hi - lo) > tol; ++it) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  // Endpoints are candidates too: the maximum of a monotone f sits on the boundary.
  GoldenResult best{0.5 * (lo + hi), f(0.5 * (lo + hi))};
  for (double x : {a0, b0}) {
    const double fx = f(x);
    if (fx > best.value) best = {x, fx};
  }
  return best;
}

// Chunk size used by mc_expect. Fixed so the result does not depend on the
// number of worker threads.
inline constexpr std::size_t mc_chunk_size = 4096;

// Plain i.i.d. Monte Carlo: sampler(Rng&) -> sample, integrand(sample) -> real.
// Chunk c draws from make_stream(seed, c); chunk statistics are merged in
// chunk order, so the estimate is bit-identical for any thread count.
template <class Sampler, class Integrand>
McEstimate mc_expect(Sampler&& sampler, Integrand&& integrand, std::size_t n_samples,
                     RngSeed seed, unsigned threads = 1) {
  if (n_samples < 1) throw invalid_input("mc_expect: n_samples must be at least 1");
  const std::size_t n_chunks = (n_samples + mc_chunk_size - 1) / mc_chunk_size;
  auto chunk = [&](std::size_t c) {
    Rng rng = make_stream(seed, c);
    RunningStats stats;
    const std::size_t begin = c * mc_chunk_size;
    const std::size_t end = std::min(n_samples, begin + mc_chunk_size);
    for (std::size_t i = begin; i < end; ++i) {
      const double v = integrand(sampler(rng));
      if (!std::isfinite(v)) throw numerical_error("mc_expect: non-finite integrand value");
      stats.add(v);
    }
    return stats;
  };
  const auto parts = parallel_map(n_chunks, chunk, threads);
  RunningStats total;
  for (const auto& p : parts) total.merge(p);
  return total.estimate();
}

// Several integrands over one shared sample stream. integrand(sample)
// returns std::array<double, K>; one estimate per component.
template <std::size_t K, class Sampler, class Integrand>
std::array<McEstimate, K> mc_expect_many(Sampler&& sampler, Integrand&& integrand, std::size_t n_samples,
                                         RngSeed seed, unsigned threads = 1) {
  if (n_samples < 1) throw invalid_input("mc_expect: n_samples must be at least 1");
  const std::size_t n_chunks = (n_samples + mc_chunk_size - 1) / mc_chunk_size;
  auto chunk = [&](std::size_t c) {
    Rng rng = make_stream(seed, c);
    std::array<RunningStats, K> stats;
    const std::size_t begin = c * mc_chunk_size;
    const std::size_t end = std::min(n_samples, begin + mc_chunk_size);
    for (std::size_t i = begin; i < end; ++i) {
      const std::array<double, K> v = integrand(sampler(rng));
      for (std::size_t k = 0; k < K; ++k) {
        if (!std::isfinite(v[k])) throw numerical_error("mc_expect: non-finite integrand value");
        stats[k].add(v[k]);
      }
    }
    return stats;
  };
  const auto parts = parallel_map(n_chunks, chunk, threads);
  std::array<RunningStats, K> total;
  for (const auto& p : parts)
    for (std::size_t k = 0; k < K; ++k) total[k].merge(p[k]);
  std::array<McEstimate, K> out;
  for (std::size_t k = 0; k < K; ++k) out[k] = total[k].estimate();
  return out;
}

}  // namespace crowdcontest::numerics
