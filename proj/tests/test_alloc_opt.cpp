#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <moldalloc/alloc_opt.hpp>

#include "oracles.hpp"

namespace moldalloc {
namespace {

const SpeedupFunction kSublinear = validate({1, 1.8, 2.5, 3, 3.4});
const SpeedupFunction kLinear = validate({1, 2, 3, 4, 5});

void expect_invariants(const OptimalAllocation& a) {
  const auto& s = a.speedup;
  double rate = 0.0, cap = 0.0, jobs = 0.0, psum = 0.0;
  for (std::size_t i = 1; i <= a.degree(); ++i) {
    const double y = a.y_star[i - 1];
    EXPECT_GE(y, 0.0);
    rate += s.at(i) * y;
    cap += static_cast<double>(i) * y;
    jobs += y;
    psum += a.p_star[i - 1];
    EXPECT_GE(a.p_star[i - 1], 0.0);
    EXPECT_LE(a.p_star[i - 1], 1.0);
    EXPECT_EQ(a.p_star[i - 1] > 0.0, y > 0.0) << "i = " << i;
  }
  EXPECT_NEAR(rate, a.lambda, 1e-12);
  EXPECT_LE(cap, 1.0 + 1e-12);
  EXPECT_NEAR(psum, 1.0, 1e-12);
  EXPECT_NEAR(a.d_star, jobs / a.lambda, 1e-12 * std::max(1.0, a.d_star));
  ASSERT_GE(a.support.size(), 1u);
  ASSERT_LE(a.support.size(), 2u);
  EXPECT_LE(a.i2, a.i1 + 1);
}

TEST(SolveP, SublinearMeanFieldPoint) {
  const auto a = solve_p(kSublinear, 0.8);
  EXPECT_EQ(a.d_star, 0.375);
  EXPECT_EQ(a.solution_case, SolutionCase::TwoPoint);
  EXPECT_EQ(a.support, (std::vector<std::size_t>{3, 4}));
  const std::vector<double> y{0, 0, 0.2, 0.1, 0};
  const std::vector<double> p{0, 0, 0.625, 0.375, 0};
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(a.y_star[k], y[k], 1e-15);
    EXPECT_NEAR(a.p_star[k], p[k], 1e-15);
  }
  expect_invariants(a);
}

TEST(SolveP, LinearPutsEverythingOnD) {
  const auto a = solve_p(kLinear, 0.8);
  EXPECT_EQ(a.d_star, 0.2);
  EXPECT_EQ(a.support, (std::vector<std::size_t>{5}));
  EXPECT_EQ(a.y_star[4], 0.8 / 5);
  EXPECT_EQ(a.p_star[4], 1.0);
  expect_invariants(a);
}

TEST(SolveP, BoundaryAtLastRatio) {
  const auto a = solve_p(kSublinear, 3.4 / 5);
  EXPECT_EQ(a.support, (std::vector<std::size_t>{5}));
  EXPECT_NEAR(a.y_star[4], 0.2, 1e-15);
  expect_invariants(a);
}

TEST(SolveP, RatioTiePicksLargestIndex) {
  // s_2/2 = s_3/3 = 0.9: lambda = 0.9 must land on i = 3.
  const auto s = validate({1, 1.8, 2.7, 3.2});
  const auto a = solve_p(s, 0.9);
  EXPECT_EQ(a.solution_case, SolutionCase::RatioTie);
  EXPECT_EQ(a.support, (std::vector<std::size_t>{3}));
  EXPECT_NEAR(a.y_star[2], 0.9 / 2.7, 1e-15);
  expect_invariants(a);
}

TEST(SolveP, FullLoadUsesUnitRatioBlock) {
  const auto a = solve_p(validate({1, 2, 2.5}), 1.0);
  EXPECT_EQ(a.support, (std::vector<std::size_t>{2}));
  EXPECT_DOUBLE_EQ(a.d_star, 0.5);
}

TEST(SolveP, RejectsInfeasibleRates) {
  for (double lambda : {1.1, 0.0, -0.5, std::nan("")}) {
    try {
      solve_p(kSublinear, lambda);
      FAIL() << lambda;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InfeasibleRate);
    }
  }
}

TEST(EnumerationOracle, SmallCases) {
  const auto two = enumerate_lp_oracle(validate({1, 2}), 1.0);
  EXPECT_DOUBLE_EQ(two.objective, 0.5);
  EXPECT_DOUBLE_EQ(two.y[0], 0.0);
  EXPECT_DOUBLE_EQ(two.y[1], 0.5);
  EXPECT_NEAR(enumerate_lp_oracle(kSublinear, 0.8).objective, 0.375, 1e-15);
  EXPECT_THROW(enumerate_lp_oracle(kSublinear, 1.5), Error);
}

TEST(EnumerationOracle, AgreesWithClosedForm) {
  std::mt19937_64 gen(20240611);
  std::uniform_int_distribution<int> degree(1, 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int unique_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = static_cast<std::size_t>(degree(gen));
    const auto s = validate(oracle::random_speedup_values(gen, d, trial % 3 == 0 ? 0.4 : 0.0));
    double lambda = 1.0 - unit(gen);
    if (trial % 5 == 0) lambda = s.ratio(1 + gen() % d);  // exact tie
    const auto a = solve_p(s, lambda);
    const auto o = enumerate_lp_oracle(s, lambda);
    ASSERT_NEAR(a.d_star, o.objective, 1e-12 * o.objective) << "trial " << trial;
    expect_invariants(a);
    if (has_unique_optimum(a)) {
      ++unique_checked;
      for (std::size_t k = 0; k < d; ++k) {
        ASSERT_NEAR(a.y_star[k], o.y[k], 1e-12) << "trial " << trial << " k " << k;
      }
    }
  }
  EXPECT_GT(unique_checked, 500);
}

TEST(SolveP, LinearAlwaysSingleSupportAtD) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t d = 1; d <= 12; ++d) {
    for (int k = 0; k < 50; ++k) {
      const auto a = solve_p(linear_speedup(d), 1.0 - unit(gen));
      EXPECT_EQ(a.support, (std::vector<std::size_t>{d}));
    }
  }
}

TEST(SolveP, ObjectiveNonincreasingInSpeedup) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = 2 + gen() % 7;
    auto values = oracle::random_speedup_values(gen, d);
    const double lambda = 1.0 - unit(gen);
    const std::size_t i = 2 + gen() % (d - 1);
    const double before = solve_p(validate(values), lambda).d_star;
    values[i - 1] += 0.2 * unit(gen) * (values[i - 1] - values[i - 2]);
    try {
      const double after = solve_p(validate(values), lambda).d_star;
      EXPECT_LE(after, before + 1e-12);
      ++checked;
    } catch (const Error&) {
      // perturbation left the admissible set
    }
  }
  EXPECT_GT(checked, 200);
}

TEST(UniqueOptimum, DetectsCollinearSegment) {
  // Increments 1, 0.5, 0.5: the pair {2,3} is collinear with 4 on s.
  const auto s = validate({1, 1.5, 2.0, 2.5});
  const auto a = solve_p(s, 0.7);
  EXPECT_EQ(a.solution_case, SolutionCase::TwoPoint);
  EXPECT_FALSE(has_unique_optimum(a));
  EXPECT_TRUE(has_unique_optimum(solve_p(kSublinear, 0.8)));
}

TEST(UniqueOptimum, RatioTieInsideCollinearStretch) {
  // Increments 1, 0.5, 0.5: lambda = s_3/3 is met by y_3 = 1/3 and equally
  // by y_2 = y_4 = 1/6.
  const auto s = validate({1, 1.5, 2.0, 2.5});
  const auto a = solve_p(s, 2.0 / 3.0);
  ASSERT_EQ(a.solution_case, SolutionCase::RatioTie);
  EXPECT_FALSE(has_unique_optimum(a));
  const double split = (1.0 / 6.0 + 1.0 / 6.0) / (2.0 / 3.0);
  EXPECT_NEAR(a.d_star, split, 1e-15);
  // At the end of the stretch the vertex is strict again.
  EXPECT_TRUE(has_unique_optimum(solve_p(s, 1.0)));
  EXPECT_TRUE(has_unique_optimum(solve_p(validate({1, 1.8, 2.5}), 0.9)));
}

TEST(CapacityValue, BoundaryAndComposition) {
  const double rho = 0.4;
  const double at_rho = capacity_value(kSublinear, rho, rho);
  EXPECT_TRUE(std::isfinite(at_rho));
  EXPECT_DOUBLE_EQ(at_rho, rho * solve_p(kSublinear, 1.0).d_star);

  // rho/b = 0.8: value is rho·D*(0.8)/lambda_total.
  const double v = capacity_value(kSublinear, rho, 0.5, 0.4);
  EXPECT_NEAR(v, enumerate_lp_oracle(kSublinear, 0.8).objective, 1e-12);

  try {
    capacity_value(kSublinear, rho, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InfeasibleCapacity);
  }
}

TEST(CapacityValue, LinearFlatBeyondSaturation) {
  const double rho = 0.3;
  const double knee = rho * 5 / 5.0;
  const double flat = capacity_value(kLinear, rho, knee);
  for (double b = knee; b <= 1.0; b += 0.01) {
    EXPECT_NEAR(capacity_value(kLinear, rho, b), flat, 1e-15);
  }
  const double knee_sub = 0.3 / kSublinear.ratio(5);
  const double flat_sub = capacity_value(kSublinear, rho, knee_sub);
  for (double b = knee_sub; b <= 1.0; b += 0.01) {
    EXPECT_NEAR(capacity_value(kSublinear, rho, b), flat_sub, 1e-15);
  }
}

TEST(CapacityValue, ConvexNonincreasingOnGrid) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = validate(oracle::random_speedup_values(gen, 1 + gen() % 8));
    const double rho = 0.05 + 0.9 * unit(gen);
    const double h = (1.0 - rho) / 400.0;
    std::vector<double> f;
    for (int k = 0; k <= 400; ++k) f.push_back(capacity_value(s, rho, rho + h * k));
    for (std::size_t k = 1; k < f.size(); ++k) EXPECT_LE(f[k], f[k - 1] + 1e-12);
    for (std::size_t k = 1; k + 1 < f.size(); ++k) {
      EXPECT_GE(f[k - 1] + f[k + 1] - 2 * f[k], -1e-12) << "trial " << trial << " k " << k;
    }
  }
}

TEST(SolveHetero, SingleClassMatchesSolveP) {
  for (double lambda : {0.3, 0.68, 0.8, 0.95}) {
    const auto sol = solve_hetero({{lambda, 1.0, kSublinear}});
    const auto a = solve_p(kSublinear, lambda);
    EXPECT_EQ(sol.total_objective, a.d_star) << lambda;
    EXPECT_LE(sol.reservations[0], 1.0);
    for (std::size_t k = 0; k < 5; ++k) {
      EXPECT_NEAR(sol.occupancy[0][k], a.y_star[k], 1e-12);
    }
  }
}

TEST(SolveHetero, SymmetricClassesSplitEvenly) {
  const auto sol = solve_hetero({{0.35, 1.0, kSublinear}, {0.35, 1.0, kSublinear}});
  EXPECT_NEAR(sol.reservations[0], sol.reservations[1], 1e-12);
  EXPECT_NEAR(sol.reservations[0] + sol.reservations[1], 1.0, 1e-12);
}

TEST(SolveHetero, TwoClassExampleMatchesGrid) {
  const std::vector<WorkloadClass> classes{{0.3, 1.0, validate({1, 2})},
                                           {0.3, 1.0, validate({1, 1.5})}};
  const auto sol = solve_hetero(classes);
  const double grid = oracle::grid_search_hetero(classes, 1e-4);
  EXPECT_LE(sol.total_objective, grid + 1e-12);
  EXPECT_NEAR(sol.total_objective, grid, 1e-3);
  double used = 0.0;
  for (std::size_t j = 0; j < classes.size(); ++j) {
    EXPECT_GE(sol.reservations[j], classes[j].load() - 1e-15);
    used += sol.reservations[j];
    // Per-class routing uses p_{i,j} = s_{i,j}·y_{i,j}/rho_j.
    for (std::size_t i = 1; i <= classes[j].speedup.degree(); ++i) {
      EXPECT_NEAR(sol.per_class[j].p_star[i - 1],
                  classes[j].speedup.at(i) * sol.occupancy[j][i - 1] / classes[j].load(), 1e-12);
    }
  }
  EXPECT_LE(used, 1.0 + 1e-12);
}

TEST(SolveHetero, RejectsOverload) {
  try {
    solve_hetero({{0.6, 1.0, kLinear}, {0.5, 1.0, kLinear}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Overloaded);
  }
}

}  // namespace
}  // namespace moldalloc
