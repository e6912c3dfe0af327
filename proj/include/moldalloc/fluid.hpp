#pragma once

// Deterministic fluid limit of the loss system under probabilistic greedy
// routing:  dx_i/dt = lambda·p*_i - s_i·x_i = s_i·(y*_i - x_i).
// The components decouple, so the exact trajectory is available alongside the
// RK4 integrator and serves as its oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "alloc_opt.hpp"
#include "error.hpp"

namespace moldalloc {

struct FluidState {
  std::vector<double> x;
  double t = 0.0;
};

namespace detail {

inline void fluid_drift(const OptimalAllocation& policy, const std::vector<double>& x,
                        std::vector<double>& out) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    out[k] = policy.lambda * policy.p_star[k] - policy.speedup.at(k + 1) * x[k];
  }
}

inline void check_fluid_state(std::vector<double>& x, double t) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k]) || x[k] < -1e-9) {
      throw Error(Errc::NonfiniteState,
                  "x_" + std::to_string(k + 1) + " = " + std::to_string(x[k]) + " at t = " +
                      std::to_string(t),
                  k + 1);
    }
    if (x[k] < 0.0) x[k] = 0.0;
  }
}

}  // namespace detail

inline FluidState closed_form(const FluidState& x0, const OptimalAllocation& policy, double t) {
  FluidState out{x0.x, x0.t + t};
  for (std::size_t k = 0; k < out.x.size(); ++k) {
    const double y = policy.y_star[k];
    out.x[k] = y + (x0.x[k] - y) * std::exp(-policy.speedup.at(k + 1) * t);
  }
  return out;
}

// Fixed-step classical RK4. The returned trajectory starts with x0 and holds
// one sample per step; the final step is shortened to land on t_end.
inline std::vector<FluidState> integrate(const FluidState& x0, const OptimalAllocation& policy,
                                         double t_end, double dt) {
  if (!(dt > 0.0) || !(t_end >= 0.0)) {
    throw Error(Errc::OutOfRange, "need dt > 0 and t_end >= 0");
  }
  if (x0.x.size() != policy.degree()) {
    throw Error(Errc::OutOfRange, "initial state dimension does not match the policy");
  }
  std::vector<double> x = x0.x;
  detail::check_fluid_state(x, x0.t);

  const std::size_t d = x.size();
  std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  std::vector<FluidState> traj;
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  traj.reserve(steps + 1);
  traj.push_back({x, x0.t});

  for (std::size_t step = 0; step < steps; ++step) {
    const double start = static_cast<double>(step) * dt;
    const double h = std::min(dt, t_end - start);
    detail::fluid_drift(policy, x, k1);
    for (std::size_t k = 0; k < d; ++k) tmp[k] = x[k] + 0.5 * h * k1[k];
    detail::fluid_drift(policy, tmp, k2);
    for (std::size_t k = 0; k < d; ++k) tmp[k] = x[k] + 0.5 * h * k2[k];
    detail::fluid_drift(policy, tmp, k3);
    for (std::size_t k = 0; k < d; ++k) tmp[k] = x[k] + h * k3[k];
    detail::fluid_drift(policy, tmp, k4);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    const double elapsed = step + 1 == steps ? t_end : start + dt;
    detail::check_fluid_state(x, x0.t + elapsed);
    traj.push_back({x, x0.t + elapsed});
  }
  return traj;
}

}  // namespace moldalloc
