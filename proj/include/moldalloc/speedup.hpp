#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace moldalloc {

enum class SpeedupKind { Linear, Sublinear };

// Speed-up factors s_1..s_d of a moldable job. s_i is the factor by which the
// execution time shrinks on i servers. Always satisfies
//   s_1 = 1,  s_i < s_{i+1},  s_i / i >= s_{i+1} / (i+1).
// Immutable once built; construct through validate() or the family helpers.
class SpeedupFunction {
 public:
  std::size_t degree() const noexcept { return values_.size(); }

  // 1-based access, i in [1, d].
  double at(std::size_t i) const { return values_.at(i - 1); }

  // Per-server efficiency s_i / i.
  double ratio(std::size_t i) const { return at(i) / static_cast<double>(i); }

  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const SpeedupFunction&, const SpeedupFunction&) = default;

 private:
  explicit SpeedupFunction(std::vector<double> values) : values_(std::move(values)) {}

  friend SpeedupFunction validate(std::span<const double> values);

  std::vector<double> values_;
};

// Checks the speed-up invariants with exact comparisons. Concavity is tested
// in cross-multiplied form (i+1)·s_i >= i·s_{i+1}, so integral inputs such as
// the linear family compare without rounding. Errors name the first index k
// whose value breaks the pattern relative to s_{k-1}.
inline SpeedupFunction validate(std::span<const double> values) {
  if (values.empty()) {
    throw Error(Errc::OutOfRange, "speed-up function needs at least one value");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      throw Error(Errc::OutOfRange, "speed-up value s_" + std::to_string(k + 1) + " is not finite",
                  k + 1);
    }
  }
  if (values[0] != 1.0) {
    throw Error(Errc::NotStartingAtOne, "s_1 must equal 1", 1);
  }
  for (std::size_t i = 1; i < values.size(); ++i) {
    // s_i = values[i-1], s_{i+1} = values[i]
    if (!(values[i - 1] < values[i])) {
      throw Error(Errc::NotStrictlyIncreasing,
                  "s_" + std::to_string(i) + " >= s_" + std::to_string(i + 1), i + 1);
    }
    const double lhs = static_cast<double>(i + 1) * values[i - 1];
    const double rhs = static_cast<double>(i) * values[i];
    if (!(lhs >= rhs)) {
      throw Error(Errc::NotConcave,
                  "s_" + std::to_string(i) + "/" + std::to_string(i) + " < s_" +
                      std::to_string(i + 1) + "/" + std::to_string(i + 1),
                  i + 1);
    }
  }
  SpeedupFunction s{std::vector<double>(values.begin(), values.end())};
  for (std::size_t i = 1; i <= s.degree(); ++i) {
    if (s.at(i) > static_cast<double>(i)) {
      // Implied by s_1 = 1 and the ratio condition.
      throw Error(Errc::NotConcave, "s_" + std::to_string(i) + " exceeds " + std::to_string(i), i);
    }
  }
  return s;
}

inline SpeedupFunction validate(std::initializer_list<double> values) {
  return validate(std::span<const double>(values.begin(), values.size()));
}

inline SpeedupFunction validate(const std::vector<double>& values) {
  return validate(std::span<const double>(values));
}

inline SpeedupKind classify(const SpeedupFunction& s) noexcept {
  for (std::size_t i = 1; i <= s.degree(); ++i) {
    if (s.at(i) != static_cast<double>(i)) return SpeedupKind::Sublinear;
  }
  return SpeedupKind::Linear;
}

inline SpeedupFunction linear_speedup(std::size_t d) {
  if (d == 0) throw Error(Errc::OutOfRange, "degree must be >= 1");
  std::vector<double> v(d);
  for (std::size_t i = 1; i <= d; ++i) v[i - 1] = static_cast<double>(i);
  return validate(v);
}

// Amdahl's law with parallel fraction p: s_i = 1 / ((1-p) + p/i), evaluated as
// i / ((1-p)·i + p) so that p = 1 yields exact integers.
inline SpeedupFunction amdahl(double p, std::size_t d) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::OutOfRange, "parallel fraction must lie in [0,1]");
  if (d == 0) throw Error(Errc::OutOfRange, "degree must be >= 1");
  if (p == 0.0 && d > 1) {
    throw Error(Errc::DegenerateSpeedup, "p = 0 gives a constant speed-up; use d = 1 for serial jobs");
  }
  std::vector<double> v(d);
  for (std::size_t i = 1; i <= d; ++i) {
    const double di = static_cast<double>(i);
    v[i - 1] = di / ((1.0 - p) * di + p);
  }
  v[0] = 1.0;
  return validate(v);
}

// Arrival-rate scaling lambda(n) = 1 - beta·n^(-alpha).
struct TrafficRegime {
  double alpha = 0.0;
  double beta = 0.2;

  friend bool operator==(const TrafficRegime&, const TrafficRegime&) = default;
};

inline double lambda_of(const TrafficRegime& regime, long long n) {
  if (n < 1) throw Error(Errc::OutOfRange, "system size must be >= 1");
  if (!(regime.alpha >= 0.0) || !(regime.beta > 0.0)) {
    throw Error(Errc::RegimeInfeasible, "need alpha >= 0 and beta > 0");
  }
  const double lambda = 1.0 - regime.beta * std::pow(static_cast<double>(n), -regime.alpha);
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw Error(Errc::RegimeInfeasible,
                "lambda(" + std::to_string(n) + ") = " + std::to_string(lambda) + " is outside (0,1)");
  }
  return lambda;
}

}  // namespace moldalloc
