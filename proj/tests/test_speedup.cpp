#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <moldalloc/speedup.hpp>

namespace moldalloc {
namespace {

Errc error_code(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::ConfigInvalid;
}

TEST(Speedup, AcceptsSublinearVector) {
  const auto s = validate({1, 1.8, 2.5, 3, 3.4});
  EXPECT_EQ(s.degree(), 5u);
  EXPECT_EQ(s.at(5), 3.4);
  EXPECT_EQ(classify(s), SpeedupKind::Sublinear);
}

TEST(Speedup, LinearIsClassifiedLinear) {
  EXPECT_EQ(classify(validate({1, 2, 3, 4, 5})), SpeedupKind::Linear);
  EXPECT_EQ(classify(validate({1})), SpeedupKind::Linear);
  EXPECT_EQ(linear_speedup(5), validate({1, 2, 3, 4, 5}));
}

TEST(Speedup, RejectsSuperlinearStep) {
  try {
    validate({1, 3, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotConcave);
    EXPECT_EQ(e.index(), 2u);  // s_2/2 > s_1/1
  }
}

TEST(Speedup, RejectsBadFirstValueAndPlateaus) {
  EXPECT_EQ(error_code([] { validate({2, 3}); }), Errc::NotStartingAtOne);
  EXPECT_EQ(error_code([] { validate({0.999999, 1.5}); }), Errc::NotStartingAtOne);
  try {
    validate({1, 1.5, 1.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotStrictlyIncreasing);
    EXPECT_EQ(e.index(), 3u);
  }
  EXPECT_EQ(error_code([] { validate(std::vector<double>{}); }), Errc::OutOfRange);
}

TEST(Speedup, ComparisonsAreExact) {
  // s_2/2 exceeds s_1/1 by one ulp: rejected, no epsilon slack.
  EXPECT_EQ(error_code([] { validate({1, std::nextafter(2.0, 3.0)}); }), Errc::NotConcave);
  EXPECT_NO_THROW(validate({1, 2}));
}

TEST(Speedup, Amdahl) {
  EXPECT_EQ(amdahl(1.0, 5), linear_speedup(5));
  const auto half = amdahl(0.5, 2);
  EXPECT_DOUBLE_EQ(half.at(2), 4.0 / 3.0);
  EXPECT_EQ(error_code([] { amdahl(0.0, 3); }), Errc::DegenerateSpeedup);
  EXPECT_EQ(error_code([] { amdahl(1.5, 3); }), Errc::OutOfRange);
  EXPECT_EQ(amdahl(0.0, 1).degree(), 1u);
}

TEST(Speedup, AmdahlFamilyAlwaysValidates) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> p(1e-6, 1.0);
  std::uniform_int_distribution<int> d(2, 64);
  for (int trial = 0; trial < 2000; ++trial) {
    const double frac = trial == 0 ? 1.0 : p(gen);
    const auto s = amdahl(frac, static_cast<std::size_t>(d(gen)));
    for (std::size_t i = 1; i <= s.degree(); ++i) {
      ASSERT_LE(s.at(i), static_cast<double>(i));
    }
  }
}

TEST(Speedup, LambdaOfRegimes) {
  EXPECT_DOUBLE_EQ(lambda_of({0.0, 0.2}, 1), 0.8);
  EXPECT_DOUBLE_EQ(lambda_of({0.0, 0.2}, 4000), 0.8);
  EXPECT_NEAR(lambda_of({0.5, 0.1}, 100), 0.99, 1e-15);
  EXPECT_EQ(error_code([] { lambda_of({0.0, 1.0}, 10); }), Errc::RegimeInfeasible);
  EXPECT_EQ(error_code([] { lambda_of({0.5, 2.0}, 1); }), Errc::RegimeInfeasible);
}

TEST(Speedup, LambdaOfMonotoneInN) {
  double prev = 0.0;
  for (long long n = 1; n < 5000; n += 7) {
    const double v = lambda_of({0.5, 0.1}, n);
    EXPECT_GT(v, prev);
    prev = v;
    EXPECT_EQ(lambda_of({0.0, 0.3}, n), lambda_of({0.0, 0.3}, 1));
  }
}

}  // namespace
}  // namespace moldalloc
