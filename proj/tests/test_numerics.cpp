#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "crowdcontest/numerics.hpp"

using namespace crowdcontest;
using namespace crowdcontest::numerics;

TEST(Bisect, LinearRoot) {
  EXPECT_NEAR(bisect([](double x) { return x - 0.5; }, 0.0, 1.0), 0.5, 1e-12);
}

TEST(Bisect, SquareRootOfTwo) {
  EXPECT_NEAR(bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0), std::sqrt(2.0), 1e-9);
}

TEST(Bisect, TwoPlayerQuadratic) {
  const double x = bisect([](double x) { return 4 * x * x + x - 0.25; }, 0.0, 1.0);
  EXPECT_NEAR(x, (std::sqrt(5.0) - 1.0) / 8.0, 1e-9);
}

TEST(Bisect, RejectsUnbracketed) {
  EXPECT_THROW(bisect([](double x) { return x * x + 1.0; }, -1.0, 1.0), bracket_error);
}

TEST(Bisect, ReportsNoConvergence) {
  SolverSettings s;
  s.max_iter = 3;
  s.abs_tol = 1e-15;
  s.rel_tol = 0.0;
  EXPECT_THROW(bisect([](double x) { return x - 0.3; }, 0.0, 1.0, s), no_convergence);
}

TEST(Bisect, BracketKeepsSignChange) {
  // Instrumented function: every evaluation pair seen on either side must differ in sign.
  double lo_seen = 0.0, hi_seen = 3.0;
  auto f = [&](double x) {
    const double v = std::cos(x);
    if (v > 0) lo_seen = std::max(lo_seen, x);
    else hi_seen = std::min(hi_seen, x);
    return v;
  };
  const double r = bisect(f, 0.0, 3.0);
  EXPECT_LE(lo_seen, hi_seen);
  EXPECT_NEAR(r, M_PI / 2, 1e-8);
}

TEST(FixedPoint, AffineContraction) {
  auto res = fixed_point([](std::span<const double> x) { return std::vector<double>{0.5 * x[0] + 1.0}; }, {0.0});
  EXPECT_NEAR(res.x[0], 2.0, 1e-6);
}

TEST(FixedPoint, IdentityConvergesImmediately) {
  auto res = fixed_point([](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); }, {7.0});
  EXPECT_EQ(res.iterations, 0u);
  EXPECT_EQ(res.x[0], 7.0);
}

TEST(FixedPoint, SymmetricTullockBestResponse) {
  auto br = [](std::span<const double> x) {
    std::vector<double> y(2);
    for (int i = 0; i < 2; ++i) {
      const double other = x[1 - i];
      y[i] = std::max(std::sqrt(other) - other, 0.0);
    }
    return y;
  };
  auto res = fixed_point(br, {0.6, 0.05});
  EXPECT_NEAR(res.x[0], 0.25, 1e-6);
  EXPECT_NEAR(res.x[1], 0.25, 1e-6);
  const auto& h = res.residual_history;
  ASSERT_GE(h.size(), 10u);
  for (std::size_t i = h.size() - 10; i + 1 < h.size(); ++i) EXPECT_LE(h[i + 1], h[i]);
}

TEST(FixedPoint, ThrowsWithLastIterate) {
  SolverSettings s = fixed_point_defaults();
  s.max_iter = 5;
  try {
    fixed_point([](std::span<const double> x) { return std::vector<double>{x[0] + 1.0}; }, {0.0}, s);
    FAIL();
  } catch (const no_convergence& e) {
    EXPECT_EQ(e.last_iterate().size(), 1u);
    EXPECT_GT(e.residual(), 0.0);
  }
}

// Symmetric N-player Tullock map on (e_1..e_N) with b=1, e0=0. The slope of
// each best response is about -(N-1)/2 at the fixed point, so damping 0.5
// overshoots for N=20.
static std::vector<double> tullock_br(std::span<const double> x) {
  double total = 0.0;
  for (double v : x) total += v;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double others = total - x[i];
    y[i] = std::max(std::sqrt(others) - others, 0.0);
  }
  return y;
}

TEST(FixedPointAdaptive, ConvergesWhereFixedDampingFails) {
  const std::size_t n = 20;
  const double target = (n - 1.0) / (n * n);
  std::vector<double> init(n, 0.01);
  init[0] = 0.04;
  SolverSettings s = fixed_point_defaults();
  s.max_iter = 2000;
  EXPECT_THROW(fixed_point(tullock_br, init, s), no_convergence);
  const auto res = fixed_point_adaptive(tullock_br, init, s);
  for (double v : res.x) EXPECT_NEAR(v, target, 1e-6);
  EXPECT_LE(res.residual, s.abs_tol);
}

TEST(FixedPointAdaptive, ReportsBestIterate) {
  SolverSettings s = fixed_point_defaults();
  s.max_iter = 50;
  try {
    fixed_point_adaptive([](std::span<const double> x) { return std::vector<double>{x[0] + 1.0}; }, {0.0}, s);
    FAIL();
  } catch (const no_convergence& e) {
    ASSERT_EQ(e.last_iterate().size(), 1u);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(MonteCarlo, ManyMatchesSingle) {
  auto sampler = [](Rng& r) { return uniform01(r); };
  const auto both = mc_expect_many<2>(sampler, [](double u) { return std::array<double, 2>{u, u * u}; }, 20'000,
                                      RngSeed{12});
  const auto first = mc_expect(sampler, [](double u) { return u; }, 20'000, RngSeed{12});
  const auto second = mc_expect(sampler, [](double u) { return u * u; }, 20'000, RngSeed{12});
  EXPECT_EQ(both[0].mean, first.mean);
  EXPECT_EQ(both[1].mean, second.mean);
  EXPECT_EQ(both[1].std_error, second.std_error);
}

TEST(GoldenSection, InteriorAndBoundary) {
  auto r = golden_section_max([](double x) { return -(x - 0.3) * (x - 0.3); }, 0.0, 1.0);
  EXPECT_NEAR(r.x, 0.3, 1e-6);
  auto m = golden_section_max([](double x) { return x; }, 0.0, 1.0);
  EXPECT_EQ(m.x, 1.0);
}

TEST(MonteCarlo, ConstantIntegrand) {
  auto est = mc_expect([](Rng& r) { return uniform01(r); }, [](double) { return 1.0; }, 1000, RngSeed{1});
  EXPECT_EQ(est.mean, 1.0);
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_EQ(est.samples, 1000u);
}

TEST(MonteCarlo, UniformMean) {
  auto est = mc_expect([](Rng& r) { return uniform01(r); }, [](double u) { return u; }, 1'000'000, RngSeed{7});
  EXPECT_NEAR(est.mean, 0.5, 3 * est.std_error);
}

TEST(MonteCarlo, OrderedPairOfUniforms) {
  const double T = 2.0;
  auto sampler = [&](Rng& r) {
    std::array<double, 2> s{T * uniform01(r), T * uniform01(r)};
    if (s[0] > s[1]) std::swap(s[0], s[1]);
    return s;
  };
  auto est = mc_expect(sampler, [](const std::array<double, 2>&) { return 1.0 + 1.0; }, 50'000, RngSeed{3});
  EXPECT_NEAR(est.mean, 2.0, 3 * est.std_error + 1e-12);
}

TEST(MonteCarlo, ReproducibleAcrossThreadCounts) {
  auto run = [](unsigned threads) {
    return mc_expect([](Rng& r) { return uniform01(r); }, [](double u) { return std::exp(u); }, 30'000,
                     RngSeed{99}, threads);
  };
  const auto a = run(1), b = run(1), c = run(4);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.mean, c.mean);
  EXPECT_EQ(a.std_error, c.std_error);
}

TEST(MonteCarlo, NonFiniteAborts) {
  EXPECT_THROW(mc_expect([](Rng& r) { return uniform01(r); }, [](double) { return NAN; }, 10, RngSeed{1}),
               numerical_error);
}

TEST(ParallelMap, OrderAndExceptions) {
  auto v = parallel_map(10, [](std::size_t i) { return static_cast<int>(i * i); }, 3);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_map(5, [](std::size_t i) -> int {
                 if (i == 2) throw invalid_input("boom");
                 return 0;
               }, 2),
               invalid_input);
}
