#pragma once

// Exact stationary analysis of small instances with exponential job sizes.
// The occupancy vector (X_1..X_d) is a continuous-time Markov chain; its
// generator is assembled densely and solved with LU. Meant as ground truth
// for the simulator at tiny scale, not as a scalable solver.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "alloc_opt.hpp"
#include "error.hpp"
#include "loss_sim.hpp"
#include "speedup.hpp"

namespace moldalloc {

// All (X_1..X_d) with sum_i i·X_i <= n, ordered colexicographically (X_d most
// significant). The empty state is always index 0.
class StateSpace {
 public:
  std::size_t size() const noexcept { return count_; }
  std::size_t degree() const noexcept { return d_; }
  long long servers() const noexcept { return n_; }

  std::span<const int> state(std::size_t index) const {
    return {data_.data() + index * d_, d_};
  }

  std::optional<std::size_t> index_of(std::span<const int> x) const {
    std::uint64_t key = 0;
    for (std::size_t k = d_; k-- > 0;) {
      if (x[k] < 0 || x[k] >= radix_[k]) return std::nullopt;
      key = key * static_cast<std::uint64_t>(radix_[k]) + static_cast<std::uint64_t>(x[k]);
    }
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  long long busy(std::size_t index) const {
    long long b = 0;
    const auto x = state(index);
    for (std::size_t k = 0; k < d_; ++k) b += static_cast<long long>(k + 1) * x[k];
    return b;
  }

 private:
  friend StateSpace enumerate_states(long long n, std::size_t d, std::size_t cap);

  long long n_ = 0;
  std::size_t d_ = 0;
  std::size_t count_ = 0;
  std::vector<int> data_;
  std::vector<int> radix_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

inline constexpr std::size_t kDefaultStateCap = 200'000;
inline constexpr std::size_t kDenseStateCap = 4'000;

inline StateSpace enumerate_states(long long n, std::size_t d, std::size_t cap = kDefaultStateCap) {
  if (n < 1 || d < 1) throw Error(Errc::OutOfRange, "need n >= 1 and d >= 1");
  StateSpace sp;
  sp.n_ = n;
  sp.d_ = d;
  sp.radix_.resize(d);
  double key_space = 1.0;
  for (std::size_t k = 0; k < d; ++k) {
    sp.radix_[k] = static_cast<int>(n / static_cast<long long>(k + 1)) + 1;
    key_space *= sp.radix_[k];
  }
  if (key_space > 1.8e19) {
    throw Error(Errc::StateSpaceTooLarge, "state key space overflows 64 bits");
  }

  std::vector<int> x(d, 0);
  // Outermost loop over X_d, innermost over X_1.
  auto recurse = [&](auto&& self, std::size_t level, long long remaining) -> void {
    const auto width = static_cast<long long>(level + 1);
    for (long long v = 0; v * width <= remaining; ++v) {
      x[level] = static_cast<int>(v);
      if (level == 0) {
        if (sp.count_ >= cap) {
          throw Error(Errc::StateSpaceTooLarge,
                      "more than " + std::to_string(cap) + " states for n = " + std::to_string(n) +
                          ", d = " + std::to_string(d));
        }
        std::uint64_t key = 0;
        for (std::size_t k = d; k-- > 0;) {
          key = key * static_cast<std::uint64_t>(sp.radix_[k]) + static_cast<std::uint64_t>(x[k]);
        }
        sp.index_.emplace(key, sp.count_);
        sp.data_.insert(sp.data_.end(), x.begin(), x.end());
        ++sp.count_;
      } else {
        self(self, level - 1, remaining - v * width);
      }
    }
    x[level] = 0;
  };
  recurse(recurse, d - 1, n);
  return sp;
}

using GeneratorMatrix = Eigen::MatrixXd;

// Arrivals move x to x + e_i at rate n·lambda·A_i(x); departures move x to
// x - e_i at rate s_i·X_i. Blocked arrivals leave the state unchanged.
inline GeneratorMatrix build_generator(const StateSpace& space, const AllocationScheme& scheme,
                                       const SpeedupFunction& s, double lambda, long long n) {
  const std::size_t count = space.size();
  const std::size_t d = space.degree();
  if (count > kDenseStateCap) {
    throw Error(Errc::StateSpaceTooLarge, std::to_string(count) +
                                              " states exceed the dense solver cap of " +
                                              std::to_string(kDenseStateCap));
  }
  if (scheme.degree() != d || s.degree() != d || space.servers() != n) {
    throw Error(Errc::ConfigInvalid, "state space, scheme and speed-up disagree on n or d");
  }
  GeneratorMatrix q = GeneratorMatrix::Zero(static_cast<Eigen::Index>(count),
                                            static_cast<Eigen::Index>(count));
  const double arrival = static_cast<double>(n) * lambda;
  std::vector<int> y(d);
  for (std::size_t from = 0; from < count; ++from) {
    const auto x = space.state(from);
    const long long free = n - space.busy(from);
    const auto grant = allocation_probabilities(scheme, free);
    double out = 0.0;
    for (std::size_t i = 1; i <= d; ++i) {
      if (grant[i] > 0.0) {
        y.assign(x.begin(), x.end());
        ++y[i - 1];
        const auto to = space.index_of(y);
        if (!to) throw Error(Errc::OutOfRange, "arrival leaves the state space");
        const double rate = arrival * grant[i];
        q(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(*to)) += rate;
        out += rate;
      }
      if (x[i - 1] > 0) {
        y.assign(x.begin(), x.end());
        --y[i - 1];
        const auto to = space.index_of(y);
        const double rate = s.at(i) * x[i - 1];
        q(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(*to)) += rate;
        out += rate;
      }
    }
    q(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(from)) = -out;
  }
  return q;
}

// States reachable from index 0 (the empty state) along positive rates.
inline std::vector<bool> reachable_from_empty(const GeneratorMatrix& q) {
  const auto count = static_cast<std::size_t>(q.rows());
  std::vector<bool> seen(count, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < count; ++v) {
      if (v != u && !seen[v] &&
          q(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) > 0.0) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

// Solves pi·Q = 0, sum(pi) = 1 on the class reachable from the empty state
// (index 0); every other state gets probability zero. One balance equation is
// replaced by the normalization row.
inline std::vector<double> stationary(const GeneratorMatrix& q) {
  const auto count = static_cast<std::size_t>(q.rows());
  const auto reach = reachable_from_empty(q);
  std::vector<std::size_t> live;
  for (std::size_t k = 0; k < count; ++k) {
    if (reach[k]) live.push_back(k);
  }
  const auto m = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd a(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) {
      // Row r of a is the balance equation of state live[r]: column of Q.
      a(r, c) = q(static_cast<Eigen::Index>(live[c]), static_cast<Eigen::Index>(live[r]));
    }
  }
  a.row(m - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::VectorXd sol = lu.solve(rhs);

  std::vector<double> pi(count, 0.0);
  double total = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const double v = sol(r);
    if (!std::isfinite(v) || v < -1e-12) {
      throw Error(Errc::SingularSystem, "stationary solve produced an invalid probability");
    }
    pi[live[r]] = v < 0.0 ? 0.0 : v;
    total += pi[live[r]];
  }
  for (double& v : pi) v /= total;

  double residual = 0.0;
  for (std::size_t c = 0; c < count; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < count; ++r) {
      if (pi[r] != 0.0) acc += pi[r] * q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    residual = std::max(residual, std::abs(acc));
  }
  if (!(residual <= 1e-10)) {
    throw Error(Errc::SingularSystem, "stationary residual " + std::to_string(residual));
  }
  return pi;
}

struct ExactMetrics {
  double blocking_prob = 0.0;
  double mean_exec_time = 0.0;   // via Little's law
  std::vector<double> mean_x;    // E[x_i] = E[X_i]/n
  double l1_distance = 0.0;      // E||x - y*||_1
  double mean_r = 0.0;           // E[sum_i s_i x_i]
  double mean_jobs = 0.0;        // E[sum_i x_i]
  std::size_t states = 0;
  std::size_t reachable = 0;
};

inline ExactMetrics exact_metrics(const StateSpace& space, std::span<const double> pi,
                                  const AllocationScheme& scheme, const SpeedupFunction& s,
                                  double lambda, long long n) {
  const std::size_t d = space.degree();
  const auto target = solve_p(s, lambda);
  const double inv_n = 1.0 / static_cast<double>(n);
  ExactMetrics m;
  m.mean_x.assign(d, 0.0);
  m.states = space.size();
  for (std::size_t k = 0; k < space.size(); ++k) {
    if (pi[k] == 0.0) continue;
    ++m.reachable;
    const auto x = space.state(k);
    const auto grant = allocation_probabilities(scheme, n - space.busy(k));
    m.blocking_prob += pi[k] * grant[0];
    double jobs = 0.0, r = 0.0, l1 = 0.0;
    for (std::size_t i = 1; i <= d; ++i) {
      const double xi = x[i - 1] * inv_n;
      m.mean_x[i - 1] += pi[k] * xi;
      jobs += xi;
      r += s.at(i) * xi;
      l1 += std::abs(xi - target.y_star[i - 1]);
    }
    m.mean_jobs += pi[k] * jobs;
    m.mean_r += pi[k] * r;
    m.l1_distance += pi[k] * l1;
  }
  m.mean_exec_time = m.mean_jobs / (lambda * (1.0 - m.blocking_prob));
  return m;
}

// Enumerate, assemble, solve and summarize in one call.
inline ExactMetrics solve_exact(long long n, const SpeedupFunction& s, double lambda,
                                Scheme scheme_kind, std::size_t cap = kDefaultStateCap) {
  const auto target = solve_p(s, lambda);
  const auto scheme = scheme_kind == Scheme::GreedyPStar ? AllocationScheme::greedy_pstar(target)
                                                         : AllocationScheme::greedy(s.degree());
  const auto space = enumerate_states(n, s.degree(), cap);
  const auto q = build_generator(space, scheme, s, lambda, n);
  const auto pi = stationary(q);
  return exact_metrics(space, pi, scheme, s, lambda, n);
}

}  // namespace moldalloc
