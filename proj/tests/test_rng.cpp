#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <moldalloc/rng.hpp>
#include <moldalloc/service.hpp>

namespace moldalloc {
namespace {

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}),
            (PhiloxBlock{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                          {0xffffffff, 0xffffffff}),
            (PhiloxBlock{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                          {0xa4093822, 0x299f31d0}),
            (PhiloxBlock{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(StreamRng, DeterministicAndStreamsDiffer) {
  StreamRng a(42, 0), b(42, 0), c(42, 1), e(43, 0);
  std::set<std::uint64_t> seen;
  for (int k = 0; k < 1000; ++k) {
    const auto va = a();
    EXPECT_EQ(va, b());
    seen.insert(va);
    seen.insert(c());
    seen.insert(e());
  }
  EXPECT_EQ(seen.size(), 3000u);
}

TEST(StreamRng, UniformRange) {
  StreamRng rng(1, 0);
  double sum = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Service, DeterministicIsOne) {
  StreamRng rng(1, 0);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(sample_service({ServiceKind::Deterministic}, rng), 1.0);
}

TEST(Service, ParetoSupportStartsAtOneThird) {
  const ServiceDist pareto{ServiceKind::Pareto};
  EXPECT_DOUBLE_EQ(pareto_quantile(pareto, 1.0), 1.0 / 3.0);
  // CDF 1 - (3y)^(-3/2) at the quantile of u recovers 1 - u.
  for (double u : {0.9, 0.5, 0.1, 1e-3}) {
    const double y = pareto_quantile(pareto, u);
    EXPECT_NEAR(1.0 - std::pow(3.0 * y, -1.5), 1.0 - u, 1e-12);
  }
}

TEST(Service, AnalyticMeansAreOne) {
  for (auto kind : {ServiceKind::Exponential, ServiceKind::Deterministic, ServiceKind::MixedErlang,
                    ServiceKind::Pareto}) {
    EXPECT_NEAR(ServiceDist{kind}.mean(), 1.0, 1e-9);
  }
  EXPECT_DOUBLE_EQ(ServiceDist{ServiceKind::MixedErlang}.phase_rate(), 1.6);
}

TEST(Service, MixedErlangEmpiricalMoments) {
  StreamRng rng(2024, 0);
  const ServiceDist dist{ServiceKind::MixedErlang};
  double sum = 0.0, sum_sq = 0.0;
  constexpr int kDraws = 10'000'000;
  for (int k = 0; k < kDraws; ++k) {
    const double y = sample_service(dist, rng);
    sum += y;
    sum_sq += y * y;
  }
  EXPECT_NEAR(sum / kDraws, 1.0, 0.002);
  // Erlang-k at rate mu has E[Y^2] = k(k+1)/mu^2.
  EXPECT_NEAR(sum_sq / kDraws, (0.4 * 2 + 0.6 * 6) / (1.6 * 1.6), 0.006);
}

TEST(Service, ExponentialEmpiricalMean) {
  StreamRng rng(9, 3);
  double sum = 0.0;
  for (int k = 0; k < 1'000'000; ++k) sum += sample_service({ServiceKind::Exponential}, rng);
  EXPECT_NEAR(sum / 1e6, 1.0, 0.005);
}

}  // namespace
}  // namespace moldalloc
