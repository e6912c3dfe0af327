#pragma once

// Simulation campaigns: a flat key = value experiment file expands into a grid
// of cells (speed-up x regime x n x scheme x service), each replicated and
// written as CSV rows in cell-key order.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alloc_opt.hpp"
#include "error.hpp"
#include "loss_sim.hpp"
#include "parallel.hpp"
#include "speedup.hpp"
#include "stats.hpp"

namespace moldalloc {

namespace text {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) return out;
    s.remove_prefix(pos + 1);
  }
}

inline double to_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(Errc::ConfigInvalid, std::string(what) + ": '" + std::string(s) + "' is not a number");
  }
  return v;
}

inline std::uint64_t to_uint(std::string_view s, std::string_view what) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    // Accept integral scientific notation such as 5e6.
    const double d = to_double(s, what);
    if (d < 0.0 || d != std::floor(d) || d > 1.8e19) {
      throw Error(Errc::ConfigInvalid,
                  std::string(what) + ": '" + std::string(s) + "' is not a non-negative integer");
    }
    return static_cast<std::uint64_t>(d);
  }
  return v;
}

inline std::vector<double> to_doubles(std::string_view s, char sep, std::string_view what) {
  std::vector<double> out;
  for (auto part : split(s, sep)) out.push_back(to_double(part, what));
  return out;
}

// Shortest round-trip decimal, so CSV output is byte-stable.
inline std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace text

// One entry of the `speedups` key: "linear", "amdahl:p", or an explicit list
// "s1,s2,...", optionally prefixed by "label=".
struct SpeedupChoice {
  std::string label;
  enum class Kind { Linear, Amdahl, Explicit } kind = Kind::Linear;
  double amdahl_p = 1.0;
  std::vector<double> values;

  SpeedupFunction build(std::size_t d) const {
    switch (kind) {
      case Kind::Linear: return linear_speedup(d);
      case Kind::Amdahl: return amdahl(amdahl_p, d);
      case Kind::Explicit: return validate(values);
    }
    return linear_speedup(d);
  }
};

inline SpeedupChoice parse_speedup_choice(std::string_view item) {
  item = text::trim(item);
  SpeedupChoice c;
  std::string_view body = item;
  if (const auto eq = item.find('='); eq != std::string_view::npos) {
    c.label = std::string(text::trim(item.substr(0, eq)));
    body = text::trim(item.substr(eq + 1));
  }
  if (body == "linear") {
    c.kind = SpeedupChoice::Kind::Linear;
  } else if (body.rfind("amdahl:", 0) == 0) {
    c.kind = SpeedupChoice::Kind::Amdahl;
    c.amdahl_p = text::to_double(body.substr(7), "amdahl fraction");
  } else {
    c.kind = SpeedupChoice::Kind::Explicit;
    c.values = text::to_doubles(body, ',', "speed-up value");
    (void)validate(c.values);
  }
  if (c.label.empty()) {
    c.label = std::string(body);
    std::replace(c.label.begin(), c.label.end(), ',', ' ');
  }
  return c;
}

// d as a constant or as floor(n^e).
struct DegreeRule {
  std::optional<std::size_t> fixed;
  double power = 0.0;

  std::size_t of(long long n) const {
    if (fixed) return *fixed;
    const auto d = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), power) + 1e-9));
    return std::max<std::size_t>(1, d);
  }
};

inline DegreeRule parse_degree(std::string_view s) {
  s = text::trim(s);
  DegreeRule r;
  if (s.rfind("power:", 0) == 0) {
    r.power = text::to_double(s.substr(6), "degree exponent");
    if (!(r.power > 0.0 && r.power < 1.0)) {
      throw Error(Errc::ConfigInvalid, "degree exponent must lie in (0,1)");
    }
  } else {
    r.fixed = static_cast<std::size_t>(text::to_uint(s, "d"));
    if (*r.fixed == 0) throw Error(Errc::ConfigInvalid, "d must be >= 1");
  }
  return r;
}

inline SscMode parse_ssc_mode(std::string_view s) {
  s = text::trim(s);
  if (s == "report" || s == "true" || s == "on") return SscMode::Report;
  if (s == "enforce") return SscMode::Enforce;
  if (s == "off" || s == "false") return SscMode::Off;
  throw Error(Errc::ConfigInvalid, "ssc_monitor must be off, report or enforce");
}

struct ExperimentSpec {
  std::string name = "experiment";
  std::vector<SpeedupChoice> speedups;
  DegreeRule degree{5, 0.0};
  std::vector<long long> n_grid;
  std::vector<TrafficRegime> regimes;
  std::optional<double> lambda;  // explicit rate instead of regimes
  std::vector<Scheme> schemes{Scheme::GreedyPStar};
  std::vector<ServiceDist> services{ServiceDist{}};
  std::size_t replications = 5;
  std::uint64_t total_arrivals = 1'000'000;
  std::optional<std::uint64_t> warmup_arrivals;
  std::uint64_t seed = 1;
  SscMode ssc = SscMode::Report;
  std::string output_dir = ".";

  void apply_paper_scale() {
    total_arrivals = 5'000'000;
    replications = 100;
    warmup_arrivals.reset();
  }

  void check() const {
    if (speedups.empty()) throw Error(Errc::ConfigInvalid, "speedups is empty");
    if (n_grid.empty()) throw Error(Errc::ConfigInvalid, "n_grid is empty");
    if (!std::is_sorted(n_grid.begin(), n_grid.end()) ||
        std::adjacent_find(n_grid.begin(), n_grid.end()) != n_grid.end()) {
      throw Error(Errc::ConfigInvalid, "n_grid must be strictly ascending");
    }
    if (n_grid.front() < 1) throw Error(Errc::ConfigInvalid, "n_grid entries must be >= 1");
    if (regimes.empty() == !lambda.has_value()) {
      throw Error(Errc::ConfigInvalid, "set exactly one of regimes and lambda");
    }
    if (schemes.empty() || services.empty()) {
      throw Error(Errc::ConfigInvalid, "schemes and services must be non-empty");
    }
    if (replications == 0) throw Error(Errc::ConfigInvalid, "replications must be >= 1");
    for (const auto& r : regimes) {
      for (long long n : n_grid) (void)lambda_of(r, n);
    }
    if (lambda && !(*lambda > 0.0 && *lambda <= 1.0)) {
      throw Error(Errc::ConfigInvalid, "lambda must lie in (0,1]");
    }
    for (const auto& c : speedups) {
      for (long long n : n_grid) {
        const auto d = c.kind == SpeedupChoice::Kind::Explicit ? c.values.size() : degree.of(n);
        if (static_cast<long long>(d) > n) {
          throw Error(Errc::ConfigInvalid, "speed-up '" + c.label + "' has degree " +
                                               std::to_string(d) + " > n = " + std::to_string(n));
        }
      }
    }
  }
};

// Reads the flat schema: one `key = value` per line, '#' starts a comment.
inline ExperimentSpec parse_spec(std::istream& in, const std::string& source = "<spec>") {
  ExperimentSpec spec;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  bool degree_set = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = text::trim(view);
    if (view.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::ConfigInvalid, where + "expected key = value");
    const std::string key(text::trim(view.substr(0, eq)));
    const std::string_view value = text::trim(view.substr(eq + 1));
    if (seen.count(key)) {
      throw Error(Errc::ConfigInvalid,
                  where + "duplicate key '" + key + "' (first on line " + std::to_string(seen[key]) + ")");
    }
    seen[key] = lineno;
    try {
      if (key == "name") {
        spec.name = std::string(value);
      } else if (key == "speedups") {
        for (auto item : text::split(value, ';')) {
          if (!item.empty()) spec.speedups.push_back(parse_speedup_choice(item));
        }
      } else if (key == "d") {
        spec.degree = parse_degree(value);
        degree_set = true;
      } else if (key == "n_grid") {
        for (auto item : text::split(value, ',')) {
          spec.n_grid.push_back(static_cast<long long>(text::to_uint(item, "n_grid")));
        }
      } else if (key == "regimes") {
        for (auto item : text::split(value, ';')) {
          const auto ab = text::split(item, ':');
          if (ab.size() != 2) throw Error(Errc::ConfigInvalid, "regime must be alpha:beta");
          spec.regimes.push_back({text::to_double(ab[0], "alpha"), text::to_double(ab[1], "beta")});
        }
      } else if (key == "lambda") {
        spec.lambda = text::to_double(value, "lambda");
      } else if (key == "schemes") {
        spec.schemes.clear();
        for (auto item : text::split(value, ',')) spec.schemes.push_back(parse_scheme(item));
      } else if (key == "services") {
        spec.services.clear();
        for (auto item : text::split(value, ',')) spec.services.push_back(parse_service(item));
      } else if (key == "replications") {
        spec.replications = static_cast<std::size_t>(text::to_uint(value, key));
      } else if (key == "total_arrivals") {
        spec.total_arrivals = text::to_uint(value, key);
      } else if (key == "warmup_arrivals") {
        spec.warmup_arrivals = text::to_uint(value, key);
      } else if (key == "seed") {
        spec.seed = text::to_uint(value, key);
      } else if (key == "ssc_monitor") {
        spec.ssc = parse_ssc_mode(value);
      } else if (key == "output_dir") {
        spec.output_dir = std::string(value);
      } else {
        throw Error(Errc::ConfigInvalid, "unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      throw Error(e.code(), where + e.message(), e.index());
    }
  }
  if (degree_set && spec.degree.fixed) {
    for (const auto& c : spec.speedups) {
      if (c.kind == SpeedupChoice::Kind::Explicit && c.values.size() != *spec.degree.fixed) {
        throw Error(Errc::ConfigInvalid, source + ": d = " + std::to_string(*spec.degree.fixed) +
                                             " disagrees with speed-up '" + c.label + "'");
      }
    }
  }
  spec.check();
  return spec;
}

inline ExperimentSpec parse_spec_string(const std::string& body) {
  std::istringstream in(body);
  return parse_spec(in);
}

inline ExperimentSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open '" + path + "'");
  return parse_spec(in, path);
}

struct Cell {
  std::size_t speedup_index = 0;
  std::string speedup_label;
  std::optional<TrafficRegime> regime;
  long long n = 0;
  Scheme scheme = Scheme::GreedyPStar;
  ServiceDist service;
  SimConfig config;

  // Cells that differ only in n belong to one series.
  std::string series() const {
    std::string s = speedup_label + "|" + std::string(to_string(scheme)) + "|" +
                    std::string(to_string(service.kind));
    if (regime) s += "|" + text::num(regime->alpha) + ":" + text::num(regime->beta);
    return s;
  }
};

// Cross product in key order: speed-up, regime, n, scheme, service.
inline std::vector<Cell> expand_cells(const ExperimentSpec& spec) {
  spec.check();
  std::vector<std::optional<TrafficRegime>> regimes;
  if (spec.lambda) {
    regimes.push_back(std::nullopt);
  } else {
    for (const auto& r : spec.regimes) regimes.push_back(r);
  }
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < spec.speedups.size(); ++si) {
    for (const auto& regime : regimes) {
      for (long long n : spec.n_grid) {
        const auto& choice = spec.speedups[si];
        const std::size_t d = choice.kind == SpeedupChoice::Kind::Explicit ? choice.values.size()
                                                                           : spec.degree.of(n);
        const auto s = choice.build(d);
        for (Scheme scheme : spec.schemes) {
          for (const auto& service : spec.services) {
            Cell c;
            c.speedup_index = si;
            c.speedup_label = choice.label;
            c.regime = regime;
            c.n = n;
            c.scheme = scheme;
            c.service = service;
            c.config.n = n;
            c.config.speedup = s;
            c.config.regime = regime;
            c.config.lambda = regime ? std::nullopt : spec.lambda;
            c.config.scheme = scheme;
            c.config.service = service;
            c.config.total_arrivals = spec.total_arrivals;
            c.config.warmup_arrivals = spec.warmup_arrivals;
            c.config.seed = spec.seed;
            c.config.ssc = spec.ssc;
            c.config.check();
            cells.push_back(std::move(c));
          }
        }
      }
    }
  }
  return cells;
}

struct CampaignResult {
  std::vector<Cell> cells;
  std::vector<std::optional<SimMetrics>> metrics;  // empty when unfinished
  bool interrupted = false;
};

// Every (cell, replication) pair is an independent task. Replication k of
// every cell uses stream (seed, k), so cells share random numbers across
// schemes and services. On interrupt, cells with all replications done are
// kept and the rest are left empty.
inline CampaignResult run_campaign(const ExperimentSpec& spec,
                                   std::size_t workers = default_workers()) {
  CampaignResult out;
  out.cells = expand_cells(spec);
  const std::size_t reps = spec.replications;
  const std::size_t tasks = out.cells.size() * reps;
  std::vector<RunMetrics> runs(tasks);
  std::vector<char> done(tasks, 0);
  try {
    parallel_for(tasks, workers, [&](std::size_t k) {
      if (interrupt_requested().load()) throw Interrupted{};
      runs[k] = run_replication(out.cells[k / reps].config, k % reps);
      done[k] = 1;
    });
  } catch (const Interrupted&) {
    out.interrupted = true;
  }
  out.metrics.resize(out.cells.size());
  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    const auto first = done.begin() + static_cast<long>(c * reps);
    if (!std::all_of(first, first + static_cast<long>(reps), [](char v) { return v != 0; })) continue;
    std::vector<RunMetrics> mine(runs.begin() + static_cast<long>(c * reps),
                                 runs.begin() + static_cast<long>((c + 1) * reps));
    out.metrics[c] = aggregate(out.cells[c].config, std::move(mine));
  }
  return out;
}

inline constexpr std::string_view kCsvHeader =
    "experiment,scheme,service,alpha,beta,n,d,lambda,replication,blocking_prob,mean_exec_time,"
    "d_star,l1_distance,blocking_prob_se,mean_exec_time_se,l1_distance_se,replications,speedup,"
    "rate_residual,little_residual,ssc_violations,events";

// Per-replication rows followed by one aggregate row per finished cell.
inline void write_csv(std::ostream& out, const std::string& experiment, const CampaignResult& result) {
  out << kCsvHeader << '\n';
  using text::num;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    if (!result.metrics[c]) continue;
    const auto& cell = result.cells[c];
    const auto& m = *result.metrics[c];
    const std::string prefix =
        experiment + "," + std::string(to_string(cell.scheme)) + "," +
        std::string(to_string(cell.service.kind)) + "," +
        (cell.regime ? num(cell.regime->alpha) : std::string()) + "," +
        (cell.regime ? num(cell.regime->beta) : std::string()) + "," + std::to_string(cell.n) + "," +
        std::to_string(cell.config.speedup.degree()) + "," + num(m.lambda) + ",";
    for (std::size_t k = 0; k < m.replications.size(); ++k) {
      const auto& r = m.replications[k];
      out << prefix << k << ',' << num(r.blocking_prob) << ',' << num(r.mean_exec_time) << ','
          << num(m.d_star) << ',' << num(r.l1_distance) << ",,,,1," << cell.speedup_label << ','
          << num(r.rate_residual) << ',' << num(r.little_residual) << ',' << r.ssc_violations << ','
          << r.events << '\n';
    }
    out << prefix << "agg," << num(m.blocking_prob.mean) << ',' << num(m.mean_exec_time.mean) << ','
        << num(m.d_star) << ',' << num(m.l1_distance.mean) << ',' << num(m.blocking_prob.std_error)
        << ',' << num(m.mean_exec_time.std_error) << ',' << num(m.l1_distance.std_error) << ','
        << m.replications.size() << ',' << cell.speedup_label << ',' << num(m.rate_residual.mean)
        << ',' << num(m.little_residual.mean) << ',' << m.ssc_violations << ',' << m.events << '\n';
  }
}

// Gnuplot script plotting aggregate blocking probability and mean execution
// time against n, one curve per series, with standard-error bars.
inline void write_gnuplot(std::ostream& out, const std::string& csv_name, const std::string& experiment,
                          const CampaignResult& result) {
  std::vector<const Cell*> heads;
  std::vector<std::string> keys;
  for (const auto& c : result.cells) {
    if (std::find(keys.begin(), keys.end(), c.series()) == keys.end()) {
      keys.push_back(c.series());
      heads.push_back(&c);
    }
  }
  out << "# plots " << csv_name << "\n"
      << "set datafile separator ','\n"
      << "set terminal pngcairo size 1200,500\n"
      << "set output '" << experiment << ".png'\n"
      << "set multiplot layout 1,2\n"
      << "set logscale x\n"
      << "set key outside bottom center\n"
      << "set xlabel 'n'\n";
  auto curves = [&](int value_col, int se_col) {
    for (std::size_t k = 0; k < heads.size(); ++k) {
      const Cell& c = *heads[k];
      std::string cond = "strcol(9) eq 'agg' && strcol(2) eq '" + std::string(to_string(c.scheme)) +
                         "' && strcol(3) eq '" + std::string(to_string(c.service.kind)) +
                         "' && strcol(18) eq '" + c.speedup_label + "'";
      if (c.regime) {
        cond += " && $4 == " + text::num(c.regime->alpha) + " && $5 == " + text::num(c.regime->beta);
      }
      std::string title = c.speedup_label + " " + std::string(to_string(c.scheme)) + " " +
                          std::string(to_string(c.service.kind));
      if (c.regime) title += " a=" + text::num(c.regime->alpha) + " b=" + text::num(c.regime->beta);
      out << (k == 0 ? "plot " : "     ") << "'" << csv_name << "' using 6:(" << cond << " ? $"
          << value_col << " : 1/0):" << se_col << " with yerrorlines title '" << title << "'"
          << (k + 1 < heads.size() ? ", \\\n" : "\n");
    }
  };
  out << "set ylabel 'blocking probability'\n";
  curves(10, 14);
  out << "set ylabel 'mean execution time'\n";
  curves(11, 15);
  out << "unset multiplot\n";
}

enum class ConvergenceTarget { L1Distance, Blocking, ExecGap };

inline ConvergenceTarget parse_target(std::string_view s) {
  if (s == "l1" || s == "l1_distance") return ConvergenceTarget::L1Distance;
  if (s == "blocking" || s == "blocking_prob") return ConvergenceTarget::Blocking;
  if (s == "exec_gap") return ConvergenceTarget::ExecGap;
  throw Error(Errc::ConfigInvalid, "unknown convergence target '" + std::string(s) + "'");
}

constexpr std::string_view to_string(ConvergenceTarget t) noexcept {
  switch (t) {
    case ConvergenceTarget::L1Distance: return "l1_distance";
    case ConvergenceTarget::Blocking: return "blocking";
    case ConvergenceTarget::ExecGap: return "exec_gap";
  }
  return "?";
}

// Exponent of the upper bound on the target: -1/2 (exec gap -1) with one
// support point, -min(1/4, (1-alpha)/2) with two.
inline double theoretical_exponent(ConvergenceTarget target, std::size_t support_size, double alpha) {
  if (support_size <= 1) return target == ConvergenceTarget::ExecGap ? -1.0 : -0.5;
  return -std::min(0.25, (1.0 - alpha) / 2.0);
}

struct ConvergencePoint {
  long long n = 0;
  double value = 0.0;
  double std_error = 0.0;
  bool used = true;  // false when dropped as <= 0
};

struct ConvergenceFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double theoretical_exponent = 0.0;
  std::size_t support_size = 0;
  std::vector<ConvergencePoint> points;
};

inline ConvergenceFit fit_convergence(std::vector<ConvergencePoint> points, double theoretical) {
  std::vector<double> lx, ly;
  for (auto& p : points) {
    p.used = p.value > 0.0;
    if (p.used) {
      lx.push_back(std::log(static_cast<double>(p.n)));
      ly.push_back(std::log(p.value));
    }
  }
  if (lx.size() < 4) {
    throw Error(Errc::DegenerateFit, "only " + std::to_string(lx.size()) +
                                         " grid points with a positive estimate; need 4");
  }
  const auto f = least_squares(lx, ly);
  ConvergenceFit fit;
  fit.slope = f.slope;
  fit.intercept = f.intercept;
  fit.r_squared = f.r_squared;
  fit.theoretical_exponent = theoretical;
  fit.points = std::move(points);
  return fit;
}

// Decreasing in n except for steps up that are within `k` combined standard
// errors.
inline bool decreasing_within_noise(const std::vector<ConvergencePoint>& points, double k = 2.0) {
  for (std::size_t j = 1; j < points.size(); ++j) {
    const double rise = points[j].value - points[j - 1].value;
    if (rise >= 0.0 && rise > k * std::hypot(points[j].std_error, points[j - 1].std_error)) return false;
  }
  return true;
}

struct SeriesFit {
  std::string series;
  const Cell* head = nullptr;
  ConvergenceFit fit;
  std::optional<std::string> error;  // DegenerateFit message
};

// Fits each series (cells differing only in n) of a finished campaign.
inline std::vector<SeriesFit> fit_campaign(const CampaignResult& result, ConvergenceTarget target) {
  std::vector<SeriesFit> out;
  std::vector<std::string> keys;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const auto key = result.cells[c].series();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& key : keys) {
    std::vector<ConvergencePoint> pts;
    const Cell* head = nullptr;
    const SimMetrics* largest = nullptr;
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
      const auto& cell = result.cells[c];
      if (cell.series() != key || !result.metrics[c]) continue;
      if (!head) head = &cell;
      const auto& m = *result.metrics[c];
      largest = &m;
      ConvergencePoint p;
      p.n = cell.n;
      switch (target) {
        case ConvergenceTarget::L1Distance:
          p.value = m.l1_distance.mean;
          p.std_error = m.l1_distance.std_error;
          break;
        case ConvergenceTarget::Blocking:
          p.value = m.blocking_prob.mean;
          p.std_error = m.blocking_prob.std_error;
          break;
        case ConvergenceTarget::ExecGap:
          p.value = std::abs(m.mean_exec_time.mean - m.d_star);
          p.std_error = m.mean_exec_time.std_error;
          break;
      }
      pts.push_back(p);
    }
    if (!head) continue;
    std::size_t support = 0;
    for (double y : largest->y_star) support += y > 0.0 ? 1 : 0;
    const double alpha = head->regime ? head->regime->alpha : 0.0;
    SeriesFit sf;
    sf.series = key;
    sf.head = head;
    try {
      sf.fit = fit_convergence(pts, theoretical_exponent(target, support, alpha));
    } catch (const Error& e) {
      sf.error = e.message();
      sf.fit.points = pts;
      sf.fit.theoretical_exponent = theoretical_exponent(target, support, alpha);
    }
    sf.fit.support_size = support;
    out.push_back(std::move(sf));
  }
  return out;
}

// Class lines for the heterogeneous solver: "arrival_share mean_size speedup"
// where speedup uses the `speedups` item syntax with an explicit degree
// suffix for linear/amdahl ("linear/5", "amdahl:0.9/5").
inline std::vector<WorkloadClass> parse_classes(std::istream& in, const std::string& source = "<classes>") {
  std::vector<WorkloadClass> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = text::trim(view);
    if (view.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    std::istringstream fields{std::string(view)};
    std::string share, size, speedup;
    if (!(fields >> share >> size >> speedup)) {
      throw Error(Errc::ConfigInvalid, where + "expected 'arrival_share mean_size speedup'");
    }
    try {
      std::size_t d = 0;
      std::string_view sv = speedup;
      if (const auto slash = sv.find('/'); slash != std::string_view::npos) {
        d = static_cast<std::size_t>(text::to_uint(sv.substr(slash + 1), "degree"));
        sv = sv.substr(0, slash);
      }
      const auto choice = parse_speedup_choice(sv);
      if (choice.kind != SpeedupChoice::Kind::Explicit && d == 0) {
        throw Error(Errc::ConfigInvalid, "linear/amdahl speed-ups need a '/d' suffix");
      }
      out.push_back({text::to_double(share, "arrival share"), text::to_double(size, "mean size"),
                     choice.build(d)});
    } catch (const Error& e) {
      throw Error(e.code(), where + e.message(), e.index());
    }
  }
  if (out.empty()) throw Error(Errc::ConfigInvalid, source + ": no classes");
  return out;
}

}  // namespace moldalloc
