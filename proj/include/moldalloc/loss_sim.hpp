#pragma once

// Event-driven simulation of the n-server loss system with moldable jobs.
//
// Jobs arrive as a Poisson process of rate n·lambda. An arrival that finds no
// free server is blocked and lost. Otherwise the allocation scheme grants it
// some number i of free servers, which it holds for S/s_i time units, S being
// its inherent (single-server) size.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alloc_opt.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "service.hpp"
#include "speedup.hpp"
#include "stats.hpp"

namespace moldalloc {

enum class Scheme { GreedyPStar, Greedy };

constexpr std::string_view to_string(Scheme s) noexcept {
  return s == Scheme::GreedyPStar ? "greedy_pstar" : "greedy";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "greedy_pstar" || name == "greedy(p*)" || name == "pstar") return Scheme::GreedyPStar;
  if (name == "greedy") return Scheme::Greedy;
  throw Error(Errc::ConfigInvalid, "unknown scheme '" + std::string(name) + "'");
}

// Target distribution over server counts 1..d. greedy(p*) draws the target
// from p*; plain greedy always targets d. Either way the job receives
// min(target, free) servers.
class AllocationScheme {
 public:
  static AllocationScheme greedy_pstar(const OptimalAllocation& policy) {
    return AllocationScheme(Scheme::GreedyPStar, policy.p_star);
  }

  static AllocationScheme greedy(std::size_t d) {
    std::vector<double> p(d, 0.0);
    p.back() = 1.0;
    return AllocationScheme(Scheme::Greedy, std::move(p));
  }

  Scheme kind() const noexcept { return kind_; }
  std::size_t degree() const noexcept { return routing_.size(); }
  std::span<const double> routing() const noexcept { return routing_; }

  // Inverse CDF over the fixed index order 1..d.
  std::size_t target(double u) const noexcept {
    for (std::size_t k = 0; k < cdf_.size(); ++k) {
      if (u < cdf_[k]) return k + 1;
    }
    return last_positive_;
  }

 private:
  AllocationScheme(Scheme kind, std::vector<double> routing)
      : kind_(kind), routing_(std::move(routing)) {
    cdf_.resize(routing_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < routing_.size(); ++k) {
      acc += routing_[k];
      cdf_[k] = acc;
      if (routing_[k] > 0.0) last_positive_ = k + 1;
    }
  }

  Scheme kind_;
  std::vector<double> routing_;
  std::vector<double> cdf_;
  std::size_t last_positive_ = 1;
};

// Occupancy X_1..X_d of an n-server system.
class SystemState {
 public:
  SystemState(long long n, std::size_t d) : n_(n), counts_(d, 0) {
    if (n < 1) throw Error(Errc::ConfigInvalid, "need at least one server");
  }

  long long servers() const noexcept { return n_; }
  long long busy() const noexcept { return busy_; }
  long long free() const noexcept { return n_ - busy_; }
  std::size_t degree() const noexcept { return counts_.size(); }
  long long count(std::size_t i) const { return counts_.at(i - 1); }
  std::span<const long long> counts() const noexcept { return counts_; }
  long long jobs() const noexcept { return jobs_; }

  void admit(std::size_t i) {
    if (i == 0 || i > counts_.size() || static_cast<long long>(i) > free()) {
      throw Error(Errc::OutOfRange, "cannot admit a job on " + std::to_string(i) + " servers");
    }
    ++counts_[i - 1];
    busy_ += static_cast<long long>(i);
    ++jobs_;
  }

  void release(std::size_t i) {
    if (i == 0 || i > counts_.size() || counts_[i - 1] == 0) {
      throw Error(Errc::OutOfRange, "no job on " + std::to_string(i) + " servers to release");
    }
    --counts_[i - 1];
    busy_ -= static_cast<long long>(i);
    --jobs_;
  }

 private:
  long long n_;
  std::vector<long long> counts_;
  long long busy_ = 0;
  long long jobs_ = 0;
};

// Servers granted to an arrival (0 = blocked), given the randomization draw u.
inline std::size_t allocate(const AllocationScheme& scheme, const SystemState& state, double u) {
  const long long free = state.free();
  if (free <= 0) return 0;
  const auto want = static_cast<long long>(scheme.target(u));
  return static_cast<std::size_t>(std::min(want, free));
}

// Law of the number of granted servers when `free` servers are idle; entry 0
// is the blocking probability. A_i = 1{free >= i}·p_i + 1{free == i}·sum_{j>i} p_j.
inline std::vector<double> allocation_probabilities(const AllocationScheme& scheme,
                                                    long long free) {
  const std::size_t d = scheme.degree();
  const auto p = scheme.routing();
  std::vector<double> a(d + 1, 0.0);
  if (free <= 0) {
    a[0] = 1.0;
    return a;
  }
  for (std::size_t i = 1; i <= d; ++i) {
    const auto fi = static_cast<long long>(i);
    if (free >= fi) a[i] += p[i - 1];
    if (free == fi) {
      for (std::size_t j = i + 1; j <= d; ++j) a[i] += p[j - 1];
    }
  }
  return a;
}

// Tracks the two-level occupancy invariant of greedy(p*): at most one job on
// fewer than i1 servers, none on more than i2.
class SscMonitor {
 public:
  SscMonitor(std::size_t i1, std::size_t i2) : i1_(i1), i2_(i2) {}

  void on_admit(std::size_t i) { adjust(i, +1); }
  void on_release(std::size_t i) { adjust(i, -1); }

  bool holds() const noexcept { return below_ <= 1 && above_ == 0; }
  long long below() const noexcept { return below_; }
  long long above() const noexcept { return above_; }
  long long peak_below() const noexcept { return peak_below_; }

 private:
  void adjust(std::size_t i, long long delta) {
    if (i < i1_) {
      below_ += delta;
      peak_below_ = std::max(peak_below_, below_);
    }
    if (i > i2_) above_ += delta;
  }

  std::size_t i1_;
  std::size_t i2_;
  long long below_ = 0;
  long long above_ = 0;
  long long peak_below_ = 0;
};

enum class SscMode { Off, Report, Enforce };

struct SimConfig {
  long long n = 100;
  SpeedupFunction speedup = linear_speedup(1);
  std::optional<TrafficRegime> regime;
  std::optional<double> lambda;  // explicit rate; takes precedence over regime
  Scheme scheme = Scheme::GreedyPStar;
  ServiceDist service;
  std::uint64_t total_arrivals = 1'000'000;
  std::optional<std::uint64_t> warmup_arrivals;  // default: 20% of total
  std::uint64_t seed = 1;
  SscMode ssc = SscMode::Report;

  double resolved_lambda() const {
    if (lambda) return *lambda;
    if (regime) return lambda_of(*regime, n);
    throw Error(Errc::ConfigInvalid, "neither lambda nor a traffic regime is set");
  }

  std::uint64_t resolved_warmup() const {
    return warmup_arrivals ? *warmup_arrivals : total_arrivals / 5;
  }

  void check() const {
    if (n < 1) throw Error(Errc::ConfigInvalid, "n must be >= 1");
    if (static_cast<long long>(speedup.degree()) > n) {
      throw Error(Errc::ConfigInvalid, "parallelism degree exceeds the number of servers");
    }
    if (total_arrivals == 0) throw Error(Errc::ConfigInvalid, "total_arrivals must be positive");
    if (resolved_warmup() >= total_arrivals) {
      throw Error(Errc::ConfigInvalid, "warmup_arrivals must be below total_arrivals");
    }
    const double lam = resolved_lambda();
    if (!(lam > 0.0 && lam <= 1.0)) {
      throw Error(Errc::ConfigInvalid, "lambda must lie in (0, 1]");
    }
  }
};

// Measurements of one replication over the post-warmup window.
struct RunMetrics {
  double blocking_prob = 0.0;   // blocked / offered arrivals
  double mean_exec_time = 0.0;  // over jobs accepted in the window, fixed at admission
  std::vector<double> time_avg_x;
  double l1_distance = 0.0;      // time average of ||x - y*||_1
  double throughput_rate = 0.0;  // time average of r = sum_i s_i x_i
  double time_avg_jobs = 0.0;    // time average of sum_i x_i
  double time_avg_full = 0.0;    // fraction of time with no free server
  double rate_residual = 0.0;    // lambda(1 - P_b) - E[r]
  double little_residual = 0.0;  // lambda(1 - P_b)·E[D] - E[sum x]
  std::uint64_t offered = 0;
  std::uint64_t blocked = 0;
  std::uint64_t accepted = 0;
  std::uint64_t events = 0;
  std::uint64_t ssc_violations = 0;  // events after which the invariant failed
  long long ssc_peak_below = 0;      // most simultaneous jobs below i1
  double window = 0.0;               // length of the measurement window
};

struct SimMetrics {
  double lambda = 0.0;
  double d_star = 0.0;
  std::vector<double> y_star;
  std::vector<RunMetrics> replications;

  Estimate blocking_prob;
  Estimate mean_exec_time;
  Estimate l1_distance;
  Estimate throughput_rate;
  Estimate time_avg_jobs;
  Estimate time_avg_full;
  Estimate rate_residual;
  Estimate little_residual;
  std::vector<double> time_avg_x;
  std::uint64_t events = 0;
  std::uint64_t ssc_violations = 0;
  long long ssc_peak_below = 0;
};

namespace detail {

struct SimEvent {
  double time;
  std::uint64_t seq;
  std::uint32_t servers;  // 0 marks an arrival

  bool operator>(const SimEvent& o) const noexcept {
    return time != o.time ? time > o.time : seq > o.seq;
  }
};

}  // namespace detail

// One replication. The stream for replication k is (config.seed, k).
inline RunMetrics run_replication(const SimConfig& config, std::uint64_t replication) {
  config.check();
  const long long n = config.n;
  const std::size_t d = config.speedup.degree();
  const double lambda = config.resolved_lambda();
  const auto target = solve_p(config.speedup, lambda);
  const AllocationScheme scheme = config.scheme == Scheme::GreedyPStar
                                      ? AllocationScheme::greedy_pstar(target)
                                      : AllocationScheme::greedy(d);
  const std::uint64_t warmup = config.resolved_warmup();
  const bool monitor_on = config.ssc != SscMode::Off && config.scheme == Scheme::GreedyPStar;

  StreamRng rng(config.seed, replication);
  SystemState state(n, d);
  SscMonitor monitor(target.i1, target.i2);

  std::vector<double> speed(d);
  for (std::size_t i = 1; i <= d; ++i) speed[i - 1] = config.speedup.at(i);
  const double arrival_rate = static_cast<double>(n) * lambda;
  const double inv_n = 1.0 / static_cast<double>(n);

  std::priority_queue<detail::SimEvent, std::vector<detail::SimEvent>, std::greater<>> queue;
  std::uint64_t seq = 0;
  queue.push({rng.exponential(arrival_rate), seq++, 0});

  RunMetrics m;
  m.time_avg_x.assign(d, 0.0);
  double exec_sum = 0.0;
  double area_r = 0.0, area_jobs = 0.0, area_l1 = 0.0, area_full = 0.0;
  std::vector<double> area_x(d, 0.0);

  std::uint64_t arrivals = 0;
  bool measuring = false;
  double window_start = 0.0;
  double now = 0.0;

  for (;;) {
    const detail::SimEvent ev = queue.top();
    queue.pop();
    ++m.events;
    if ((m.events & 0xFFFF) == 0 && interrupt_requested().load(std::memory_order_relaxed)) {
      throw Interrupted{};
    }

    if (measuring) {
      const double dt = ev.time - now;
      if (dt > 0.0) {
        double r = 0.0, l1 = 0.0;
        const auto counts = state.counts();
        for (std::size_t k = 0; k < d; ++k) {
          const double x = static_cast<double>(counts[k]) * inv_n;
          area_x[k] += x * dt;
          r += speed[k] * x;
          l1 += std::abs(x - target.y_star[k]);
        }
        area_r += r * dt;
        area_l1 += l1 * dt;
        area_jobs += static_cast<double>(state.jobs()) * inv_n * dt;
        if (state.free() == 0) area_full += dt;
      }
    }
    now = ev.time;

    bool done = false;
    if (ev.servers == 0) {
      ++arrivals;
      if (arrivals == warmup + 1) {
        measuring = true;
        window_start = now;
      }
      const double u = rng.uniform();
      const std::size_t granted = allocate(scheme, state, u);
      if (measuring) {
        ++m.offered;
        if (granted == 0) ++m.blocked;
      }
      if (granted > 0) {
        const double size = sample_service(config.service, rng);
        const double duration = size / speed[granted - 1];
        state.admit(granted);
        if (monitor_on) monitor.on_admit(granted);
        if (measuring) {
          ++m.accepted;
          exec_sum += duration;
        }
        queue.push({now + duration, seq++, static_cast<std::uint32_t>(granted)});
      }
      if (arrivals == config.total_arrivals) {
        done = true;
      } else {
        queue.push({now + rng.exponential(arrival_rate), seq++, 0});
      }
    } else {
      state.release(ev.servers);
      if (monitor_on) monitor.on_release(ev.servers);
    }

    if (monitor_on && !monitor.holds()) {
      ++m.ssc_violations;
      if (config.ssc == SscMode::Enforce) {
        throw Error(Errc::SscViolation,
                    "jobs below i1: " + std::to_string(monitor.below()) +
                        ", above i2: " + std::to_string(monitor.above()) + " at t = " +
                        std::to_string(now));
      }
    }
    if (done) break;
  }

  m.ssc_peak_below = monitor.peak_below();
  m.window = now - window_start;
  const double w = m.window > 0.0 ? m.window : 1.0;
  m.blocking_prob =
      m.offered ? static_cast<double>(m.blocked) / static_cast<double>(m.offered) : 0.0;
  m.mean_exec_time = m.accepted ? exec_sum / static_cast<double>(m.accepted) : 0.0;
  for (std::size_t k = 0; k < d; ++k) m.time_avg_x[k] = area_x[k] / w;
  m.throughput_rate = area_r / w;
  m.l1_distance = area_l1 / w;
  m.time_avg_jobs = area_jobs / w;
  m.time_avg_full = area_full / w;
  const double accepted_rate = lambda * (1.0 - m.blocking_prob);
  m.rate_residual = accepted_rate - m.throughput_rate;
  m.little_residual = accepted_rate * m.mean_exec_time - m.time_avg_jobs;
  return m;
}

// Pure reduction of replications, in replication order.
inline SimMetrics aggregate(const SimConfig& config, std::vector<RunMetrics> reps) {
  SimMetrics out;
  out.lambda = config.resolved_lambda();
  const auto target = solve_p(config.speedup, out.lambda);
  out.d_star = target.d_star;
  out.y_star = target.y_star;

  auto collect = [&](auto member) {
    std::vector<double> xs;
    xs.reserve(reps.size());
    for (const auto& r : reps) xs.push_back(r.*member);
    return estimate(xs);
  };
  out.blocking_prob = collect(&RunMetrics::blocking_prob);
  out.mean_exec_time = collect(&RunMetrics::mean_exec_time);
  out.l1_distance = collect(&RunMetrics::l1_distance);
  out.throughput_rate = collect(&RunMetrics::throughput_rate);
  out.time_avg_jobs = collect(&RunMetrics::time_avg_jobs);
  out.time_avg_full = collect(&RunMetrics::time_avg_full);
  out.rate_residual = collect(&RunMetrics::rate_residual);
  out.little_residual = collect(&RunMetrics::little_residual);

  const std::size_t d = config.speedup.degree();
  out.time_avg_x.assign(d, 0.0);
  for (const auto& r : reps) {
    for (std::size_t k = 0; k < d; ++k) out.time_avg_x[k] += r.time_avg_x[k];
    out.events += r.events;
    out.ssc_violations += r.ssc_violations;
    out.ssc_peak_below = std::max(out.ssc_peak_below, r.ssc_peak_below);
  }
  if (!reps.empty()) {
    for (double& v : out.time_avg_x) v /= static_cast<double>(reps.size());
  }
  out.replications = std::move(reps);
  return out;
}

inline SimMetrics run(const SimConfig& config) {
  std::vector<RunMetrics> reps;
  reps.push_back(run_replication(config, 0));
  return aggregate(config, std::move(reps));
}

// R independent replications; replication k uses stream (seed, k). Results do
// not depend on the number of workers.
inline SimMetrics replicate(const SimConfig& config, std::size_t replications,
                            std::size_t workers = default_workers()) {
  if (replications == 0) throw Error(Errc::ConfigInvalid, "need at least one replication");
  config.check();
  std::vector<RunMetrics> reps(replications);
  parallel_for(replications, workers,
               [&](std::size_t k) { reps[k] = run_replication(config, k); });
  return aggregate(config, std::move(reps));
}

}  // namespace moldalloc
