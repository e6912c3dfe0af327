#pragma once

// Optimal steady-state allocation for moldable jobs.
//
// The target occupancy y solves the linear program
//
//   minimize    (1/lambda) · sum_i y_i
//   subject to  sum_i s_i·y_i = lambda       (every arrival is served)
//               sum_i i·y_i   <= 1           (server capacity)
//               y >= 0
//
// where y_i is the expected number of jobs holding i servers, per server.
// With a concave, strictly increasing speed-up the optimum is supported on at
// most two consecutive indices and has a closed form (solve_p). The
// enumeration oracle below solves the same program by brute force over basic
// feasible solutions and shares no code with the closed form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "speedup.hpp"

namespace moldalloc {

enum class SolutionCase {
  SaturatedAtMax,  // lambda <= s_d/d: every job on d servers
  RatioTie,        // lambda == s_i/i for some i: single support at the largest such i
  TwoPoint,        // lambda strictly between consecutive ratios
};

struct OptimalAllocation {
  SpeedupFunction speedup;
  double lambda = 0.0;
  std::vector<double> y_star{};  // index k holds y_{k+1}
  std::vector<double> p_star{};  // routing probabilities, p_i = s_i·y_i/lambda
  std::vector<std::size_t> support{};  // 1-based indices with y_i > 0
  std::size_t i1 = 0;
  std::size_t i2 = 0;
  double d_star = 0.0;  // optimal mean execution time
  SolutionCase solution_case = SolutionCase::SaturatedAtMax;

  std::size_t degree() const noexcept { return y_star.size(); }
};

struct SolveOptions {
  // Relative tolerance used to detect lambda == s_i/i.
  double ratio_tolerance = 1e-12;
};

namespace detail {

inline void require_rate(double lambda) {
  if (!(lambda > 0.0) || !(lambda <= 1.0)) {
    throw Error(Errc::InfeasibleRate, "normalized arrival rate " + std::to_string(lambda) +
                                          " is outside (0, 1]");
  }
}

inline void finish_allocation(OptimalAllocation& a) {
  const std::size_t d = a.degree();
  a.p_star.assign(d, 0.0);
  a.support.clear();
  for (std::size_t i = 1; i <= d; ++i) {
    if (a.y_star[i - 1] > 0.0) {
      a.support.push_back(i);
      a.p_star[i - 1] = a.speedup.at(i) * a.y_star[i - 1] / a.lambda;
    }
  }
  a.i1 = a.support.front();
  a.i2 = a.support.back();
  if (a.support.size() == 1) {
    a.p_star[a.i1 - 1] = 1.0;
  } else {
    // Two-point routing: fix the pair to sum to one exactly.
    a.p_star[a.i2 - 1] = 1.0 - a.p_star[a.i1 - 1];
  }
}

}  // namespace detail

inline OptimalAllocation solve_p(const SpeedupFunction& s, double lambda,
                                 const SolveOptions& opts = {}) {
  detail::require_rate(lambda);
  const std::size_t d = s.degree();

  OptimalAllocation a{.speedup = s, .lambda = lambda};
  a.y_star.assign(d, 0.0);

  auto near_ratio = [&](std::size_t i) {
    const double r = s.ratio(i);
    return std::abs(lambda - r) <= opts.ratio_tolerance * r;
  };

  std::size_t tie = 0;
  for (std::size_t i = d; i >= 1; --i) {
    if (near_ratio(i)) {
      tie = i;
      break;
    }
  }

  if (tie != 0) {
    a.solution_case = tie == d ? SolutionCase::SaturatedAtMax : SolutionCase::RatioTie;
    a.y_star[tie - 1] = lambda / s.at(tie);
    a.d_star = 1.0 / s.at(tie);
  } else if (lambda < s.ratio(d)) {
    a.solution_case = SolutionCase::SaturatedAtMax;
    a.y_star[d - 1] = lambda / s.at(d);
    a.d_star = 1.0 / s.at(d);
  } else {
    // Largest i with s_i/i > lambda; then s_{i+1}/(i+1) < lambda.
    std::size_t i = 1;
    for (std::size_t k = d - 1; k >= 1; --k) {
      if (s.ratio(k) > lambda) {
        i = k;
        break;
      }
    }
    const double si = s.at(i);
    const double sj = s.at(i + 1);
    const double fi = static_cast<double>(i);
    const double fj = static_cast<double>(i + 1);
    // Both constraints bind: s_i y_i + s_j y_j = lambda, i y_i + j y_j = 1.
    const double det = fj * si - fi * sj;
    a.solution_case = SolutionCase::TwoPoint;
    a.y_star[i - 1] = (lambda * fj - sj) / det;
    a.y_star[i] = (si - lambda * fi) / det;
    a.d_star = 1.0 / det - (sj - si) / (lambda * det);
  }

  detail::finish_allocation(a);
  return a;
}

// True when the optimum is unique. Saturation at d always is. A ratio tie at
// i is unique only if (i, s_i) is a strict vertex of the graph of s: on a
// collinear stretch s_{i-1}, s_i, s_{i+1}, splitting between i-1 and i+1 is
// equally good. The two-point case needs strictly decreasing increments
// around the pair (s_0 = 0; the s_{i+2} term is dropped when i+1 = d).
// Increments equal up to rounding count as collinear.
inline bool has_unique_optimum(const OptimalAllocation& a) {
  const auto& s = a.speedup;
  auto sv = [&](std::size_t k) { return k == 0 ? 0.0 : s.at(k); };
  auto strict = [&](std::size_t k) {
    if (k + 1 > s.degree()) return true;
    const double left = sv(k) - sv(k - 1);
    return left - (sv(k + 1) - sv(k)) > 1e-12 * left;
  };
  switch (a.solution_case) {
    case SolutionCase::SaturatedAtMax:
      return true;
    case SolutionCase::RatioTie:
      return strict(a.i1);
    case SolutionCase::TwoPoint:
      return strict(a.i1) && strict(a.i1 + 1);
  }
  return false;
}

struct LpSolution {
  std::vector<double> y;
  double objective = std::numeric_limits<double>::infinity();
};

// Brute-force solve over all basic feasible solutions. A vertex of the
// feasible polytope has at most two nonzero components: either a single index
// carrying the whole rate, or a pair with the capacity constraint binding.
inline LpSolution enumerate_lp_oracle(const SpeedupFunction& s, double lambda) {
  detail::require_rate(lambda);
  constexpr double kTol = 1e-12;
  const std::size_t d = s.degree();
  LpSolution best;
  best.y.assign(d, 0.0);

  auto consider = [&](std::vector<double>&& y) {
    double total = 0.0;
    for (double v : y) total += v;
    const double obj = total / lambda;
    if (obj < best.objective) {
      best.objective = obj;
      best.y = std::move(y);
    }
  };

  for (std::size_t i = 1; i <= d; ++i) {
    const double yi = lambda / s.at(i);
    if (static_cast<double>(i) * yi <= 1.0 + kTol) {
      std::vector<double> y(d, 0.0);
      y[i - 1] = yi;
      consider(std::move(y));
    }
  }
  for (std::size_t i = 1; i <= d; ++i) {
    for (std::size_t j = i + 1; j <= d; ++j) {
      const double fi = static_cast<double>(i);
      const double fj = static_cast<double>(j);
      const double det = s.at(i) * fj - s.at(j) * fi;
      if (std::abs(det) < 1e-300) continue;
      const double yi = (lambda * fj - s.at(j)) / det;
      const double yj = (s.at(i) - lambda * fi) / det;
      if (yi < -kTol || yj < -kTol) continue;
      std::vector<double> y(d, 0.0);
      y[i - 1] = std::max(yi, 0.0);
      y[j - 1] = std::max(yj, 0.0);
      consider(std::move(y));
    }
  }
  if (!std::isfinite(best.objective)) {
    throw Error(Errc::InfeasibleRate, "no basic feasible solution");
  }
  return best;
}

// ---------------------------------------------------------------------------
// Heterogeneous workloads: server reservations per class.

struct WorkloadClass {
  double arrival_share = 0.0;  // lambda_j
  double mean_size = 1.0;      // 1/mu_j
  SpeedupFunction speedup;

  double load() const noexcept { return arrival_share * mean_size; }  // rho_j
};

// Effective normalized rate of a class holding a reserved fraction b.
inline double effective_rate(double rho, double b) {
  if (!(rho > 0.0)) throw Error(Errc::OutOfRange, "class load must be positive");
  if (!(b >= rho * (1.0 - 1e-12))) {
    throw Error(Errc::InfeasibleCapacity,
                "reservation " + std::to_string(b) + " below class load " + std::to_string(rho));
  }
  return std::min(1.0, rho / b);
}

// Optimal value of the single-class problem with capacity b:
//   min (1/lambda_total)·sum_i y_i  s.t.  sum_i s_i y_i = rho,  sum_i i·y_i <= b.
// Rescaling y by b turns it into the unit-capacity program at rate rho/b, so
// the value is (rho/lambda_total)·D*(rho/b). lambda_total is the aggregate
// arrival rate over all classes.
inline double capacity_value(const SpeedupFunction& s, double rho, double b,
                             double lambda_total = 1.0) {
  const double rate = effective_rate(rho, b);
  return rho / lambda_total * solve_p(s, rate).d_star;
}

struct HeteroSolution {
  std::vector<double> reservations;               // b*_j
  std::vector<OptimalAllocation> per_class;       // unit-capacity solution at rate rho_j/b*_j
  std::vector<std::vector<double>> occupancy;     // y*_{i,j} = b*_j · per_class[j].y_star
  double total_objective = 0.0;
  double total_lambda = 0.0;
};

// Minimizes sum_j f_j(b_j) over sum_j b_j <= 1, b_j >= rho_j. Each f_j is
// convex and piecewise linear in b with breakpoints at b = rho_j·i/s_{i,j}, so
// the budget is poured into the steepest segments first. Segments of equal
// slope share the remaining budget in proportion to their lengths.
inline HeteroSolution solve_hetero(const std::vector<WorkloadClass>& classes) {
  if (classes.empty()) throw Error(Errc::ConfigInvalid, "no workload classes");
  double total_load = 0.0;
  double total_lambda = 0.0;
  for (const auto& c : classes) {
    if (!(c.arrival_share > 0.0) || !(c.mean_size > 0.0)) {
      throw Error(Errc::OutOfRange, "class arrival share and mean size must be positive");
    }
    total_load += c.load();
    total_lambda += c.arrival_share;
  }
  if (!(total_load < 1.0)) {
    throw Error(Errc::Overloaded, "total load " + std::to_string(total_load) + " >= 1");
  }

  struct Segment {
    std::size_t cls;
    double length;
    double slope;
  };
  std::vector<Segment> segments;
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const auto& c = classes[j];
    const double rho = c.load();
    double prev_b = rho;
    double prev_f = capacity_value(c.speedup, rho, prev_b, total_lambda);
    for (std::size_t i = 2; i <= c.speedup.degree(); ++i) {
      const double b = rho / c.speedup.ratio(i);
      if (!(b > prev_b)) continue;
      const double f = capacity_value(c.speedup, rho, b, total_lambda);
      segments.push_back({j, b - prev_b, (f - prev_f) / (b - prev_b)});
      prev_b = b;
      prev_f = f;
    }
  }
  std::stable_sort(segments.begin(), segments.end(),
                   [](const Segment& a, const Segment& b) { return a.slope < b.slope; });

  std::vector<double> b(classes.size());
  for (std::size_t j = 0; j < classes.size(); ++j) b[j] = classes[j].load();
  double budget = 1.0 - total_load;

  for (std::size_t k = 0; k < segments.size() && budget > 0.0;) {
    std::size_t end = k + 1;
    const double slope = segments[k].slope;
    while (end < segments.size() &&
           std::abs(segments[end].slope - slope) <= 1e-12 * std::max(1.0, std::abs(slope))) {
      ++end;
    }
    if (slope >= 0.0) break;
    double group = 0.0;
    for (std::size_t m = k; m < end; ++m) group += segments[m].length;
    if (group <= budget) {
      for (std::size_t m = k; m < end; ++m) b[segments[m].cls] += segments[m].length;
      budget -= group;
    } else {
      const double share = budget / group;
      for (std::size_t m = k; m < end; ++m) b[segments[m].cls] += share * segments[m].length;
      budget = 0.0;
      // Land exactly on the unit budget.
      if (end - k == 1) {
        const std::size_t last = segments[k].cls;
        double others = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) {
          if (j != last) others += b[j];
        }
        b[last] = 1.0 - others;
      }
    }
    k = end;
  }

  HeteroSolution sol;
  sol.total_lambda = total_lambda;
  sol.reservations = b;
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const double rho = classes[j].load();
    const double rate = effective_rate(rho, b[j]);
    auto alloc = solve_p(classes[j].speedup, rate);
    std::vector<double> y(alloc.y_star.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = b[j] * alloc.y_star[i];
    sol.total_objective += rho / total_lambda * alloc.d_star;
    sol.occupancy.push_back(std::move(y));
    sol.per_class.push_back(std::move(alloc));
  }
  return sol;
}

}  // namespace moldalloc
