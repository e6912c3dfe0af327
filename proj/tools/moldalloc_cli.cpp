// moldalloc: solve, simulate and analyze moldable-job allocation in loss
// systems. Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <moldalloc/alloc_opt.hpp>
#include <moldalloc/exact_ctmc.hpp>
#include <moldalloc/experiment.hpp>
#include <moldalloc/fluid.hpp>
#include <moldalloc/loss_sim.hpp>

namespace fs = std::filesystem;
using namespace moldalloc;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

extern "C" void on_sigint(int) { interrupt_requested().store(true); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string join(std::span<const double> v, const char* f = "%.6g") {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt(f, v[k]);
  return "(" + s + ")";
}

struct SpeedupArgs {
  std::string speedup = "1,1.8,2.5,3,3.4";
  std::size_t d = 5;

  void add(CLI::App* app) {
    app->add_option("-s,--speedup", speedup,
                    "linear, amdahl:p, or explicit values s1,s2,... (default: 1,1.8,2.5,3,3.4)");
    app->add_option("-d,--degree", d, "degree for linear/amdahl (default 5)");
  }

  SpeedupFunction build() const {
    const auto c = parse_speedup_choice(speedup);
    return c.build(d);
  }
};

struct RateArgs {
  std::optional<double> lambda;
  std::optional<double> alpha;
  double beta = 0.2;
  std::optional<long long> n;

  void add(CLI::App* app, bool needs_n) {
    app->add_option("-l,--lambda", lambda, "normalized arrival rate");
    app->add_option("--alpha", alpha, "regime exponent; lambda = 1 - beta n^-alpha");
    app->add_option("--beta", beta, "regime coefficient (default 0.2)");
    auto* opt = app->add_option("-n,--servers", n, "number of servers");
    if (needs_n) opt->required();
  }

  double resolve() const {
    if (lambda && alpha) throw Error(Errc::ConfigInvalid, "give either --lambda or --alpha, not both");
    if (lambda) return *lambda;
    if (!alpha) throw Error(Errc::ConfigInvalid, "give --lambda or --alpha/--beta with -n");
    if (!n) throw Error(Errc::ConfigInvalid, "a traffic regime needs -n");
    return lambda_of({*alpha, beta}, *n);
  }
};

std::string_view case_name(SolutionCase c) {
  switch (c) {
    case SolutionCase::SaturatedAtMax: return "saturated at d";
    case SolutionCase::RatioTie: return "ratio tie";
    case SolutionCase::TwoPoint: return "two-point";
  }
  return "?";
}

void print_allocation(const OptimalAllocation& a) {
  std::cout << "lambda   " << fmt("%.10g", a.lambda) << "\n"
            << "y*       " << join(a.y_star) << "\n"
            << "p*       " << join(a.p_star) << "\n"
            << "I*       {";
  for (std::size_t k = 0; k < a.support.size(); ++k) std::cout << (k ? ", " : "") << a.support[k];
  std::cout << "}\n"
            << "D*       " << fmt("%.10g", a.d_star) << "\n"
            << "case     " << case_name(a.solution_case)
            << (has_unique_optimum(a) ? "" : " (optimum not unique)") << "\n";
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::ConfigInvalid, "cannot write '" + path.string() + "'");
  return out;
}

int cmd_solve(const SpeedupArgs& sa, const RateArgs& ra, const std::string& csv) {
  const auto s = sa.build();
  const auto a = solve_p(s, ra.resolve());
  print_allocation(a);
  if (!csv.empty()) {
    auto out = open_out(csv);
    out << "i,s_i,y_star,p_star\n";
    for (std::size_t i = 1; i <= s.degree(); ++i) {
      out << i << ',' << text::num(s.at(i)) << ',' << text::num(a.y_star[i - 1]) << ','
          << text::num(a.p_star[i - 1]) << '\n';
    }
  }
  return kOk;
}

void print_campaign(const CampaignResult& r) {
  std::printf("%-14s %-13s %-12s %6s %4s %9s %9s %9s %9s %9s %9s\n", "speedup", "scheme", "service",
              "n", "d", "lambda", "P_b", "se", "E[D]", "se", "D*");
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    if (!r.metrics[c]) continue;
    const auto& cell = r.cells[c];
    const auto& m = *r.metrics[c];
    std::printf("%-14s %-13s %-12s %6lld %4zu %9.5f %9.5f %9.2g %9.5f %9.2g %9.5f\n",
                cell.speedup_label.c_str(), std::string(to_string(cell.scheme)).c_str(),
                std::string(to_string(cell.service.kind)).c_str(), cell.n,
                cell.config.speedup.degree(), m.lambda, m.blocking_prob.mean,
                m.blocking_prob.std_error, m.mean_exec_time.mean, m.mean_exec_time.std_error,
                m.d_star);
  }
}

ExperimentSpec load_spec(const std::string& path, bool paper_scale, const std::string& output_dir) {
  auto spec = parse_spec_file(path);
  if (paper_scale) spec.apply_paper_scale();
  if (!output_dir.empty()) spec.output_dir = output_dir;
  return spec;
}

void write_campaign(const ExperimentSpec& spec, const CampaignResult& result) {
  const fs::path dir = spec.output_dir;
  const std::string csv_name = spec.name + ".csv";
  {
    auto out = open_out(dir / csv_name);
    write_csv(out, spec.name, result);
  }
  {
    auto out = open_out(dir / (spec.name + ".gp"));
    write_gnuplot(out, csv_name, spec.name, result);
  }
  std::cerr << "wrote " << (dir / csv_name).string() << " and " << (dir / (spec.name + ".gp")).string()
            << "\n";
}

int finish_campaign(const CampaignResult& result) {
  if (!result.interrupted) return kOk;
  std::size_t kept = 0;
  for (const auto& m : result.metrics) kept += m ? 1 : 0;
  std::cerr << "interrupted: kept " << kept << " of " << result.cells.size() << " cells\n";
  return kRuntime;
}

int cmd_simulate(const std::string& config, bool paper_scale, const std::string& output_dir,
                 std::size_t workers) {
  const auto spec = load_spec(config, paper_scale, output_dir);
  const auto result = run_campaign(spec, workers);
  print_campaign(result);
  write_campaign(spec, result);
  std::uint64_t violations = 0;
  long long peak = 0;
  for (const auto& m : result.metrics) {
    if (!m) continue;
    violations += m->ssc_violations;
    peak = std::max(peak, m->ssc_peak_below);
  }
  if (violations > 0) {
    std::cerr << "ssc monitor: " << violations << " events with more than one job below i1 or any above i2"
              << " (peak " << peak << " jobs below i1)\n";
  }
  return finish_campaign(result);
}

int cmd_convergence(const std::string& config, const std::string& target_name, bool paper_scale,
                    const std::string& output_dir, std::size_t workers) {
  const auto spec = load_spec(config, paper_scale, output_dir);
  if (spec.n_grid.size() < 4) {
    throw Error(Errc::ConfigInvalid, "a convergence fit needs at least 4 values in n_grid");
  }
  const auto target = parse_target(target_name);
  const auto result = run_campaign(spec, workers);
  print_campaign(result);
  write_campaign(spec, result);
  const auto fits = fit_campaign(result, target);

  const fs::path fit_path = fs::path(spec.output_dir) / (spec.name + "_fit.csv");
  auto out = open_out(fit_path);
  out << "experiment,series,target,n,value,value_se,used,slope,intercept,r_squared,"
         "theoretical_exponent,support_size\n";
  bool degenerate = false;
  for (const auto& f : fits) {
    std::printf("\n%s  [%s]\n", f.series.c_str(), std::string(to_string(target)).c_str());
    for (const auto& p : f.fit.points) {
      std::printf("  n = %6lld  %.6g  (se %.2g)%s\n", p.n, p.value, p.std_error,
                  p.used ? "" : "  dropped: not positive");
      out << spec.name << ',' << f.series << ',' << to_string(target) << ',' << p.n << ','
          << text::num(p.value) << ',' << text::num(p.std_error) << ',' << (p.used ? 1 : 0) << ','
          << (f.error ? "" : text::num(f.fit.slope)) << ','
          << (f.error ? "" : text::num(f.fit.intercept)) << ','
          << (f.error ? "" : text::num(f.fit.r_squared)) << ','
          << text::num(f.fit.theoretical_exponent) << ',' << f.fit.support_size << '\n';
    }
    if (f.error) {
      std::printf("  fit failed: %s\n", f.error->c_str());
      degenerate = true;
    } else {
      std::printf("  slope %.3f  (R^2 %.3f), bound exponent %.3f for |I*| = %zu\n", f.fit.slope,
                  f.fit.r_squared, f.fit.theoretical_exponent, f.fit.support_size);
      if (f.fit.slope > -0.05) std::printf("  no convergence: metric is flat in n\n");
    }
  }
  std::cerr << "wrote " << fit_path.string() << "\n";
  const int status = finish_campaign(result);
  if (status != kOk) return status;
  return degenerate ? kRuntime : kOk;
}

int cmd_exact(long long n, const SpeedupArgs& sa, const RateArgs& ra, const std::string& scheme) {
  const auto s = sa.build();
  const double lambda = ra.resolve();
  const auto m = solve_exact(n, s, lambda, parse_scheme(scheme));
  const auto target = solve_p(s, lambda);
  std::cout << "states      " << m.states << " (" << m.reachable << " reachable)\n"
            << "P_b         " << fmt("%.12g", m.blocking_prob) << "\n"
            << "E[D]        " << fmt("%.12g", m.mean_exec_time) << "\n"
            << "D*          " << fmt("%.12g", target.d_star) << "\n"
            << "E[x]        " << join(m.mean_x) << "\n"
            << "E|x - y*|   " << fmt("%.12g", m.l1_distance) << "\n"
            << "E[r]        " << fmt("%.12g", m.mean_r) << "\n";
  return kOk;
}

int cmd_hetero(const std::string& path, const std::string& csv) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open '" + path + "'");
  const auto classes = parse_classes(in, path);
  const auto sol = solve_hetero(classes);
  std::printf("total lambda %.6g, objective %.10g\n", sol.total_lambda, sol.total_objective);
  for (std::size_t j = 0; j < classes.size(); ++j) {
    std::printf("class %zu: rho %.6g  b* %.6g  D* %.6g  y* %s\n", j + 1, classes[j].load(),
                sol.reservations[j], sol.per_class[j].d_star, join(sol.occupancy[j]).c_str());
  }
  if (!csv.empty()) {
    auto out = open_out(csv);
    out << "class,rho,reservation,d_star,objective_share\n";
    for (std::size_t j = 0; j < classes.size(); ++j) {
      const double share = classes[j].arrival_share / sol.total_lambda * sol.per_class[j].d_star *
                           classes[j].mean_size;
      out << j + 1 << ',' << text::num(classes[j].load()) << ',' << text::num(sol.reservations[j])
          << ',' << text::num(sol.per_class[j].d_star) << ',' << text::num(share) << '\n';
    }
  }
  return kOk;
}

int cmd_fluid(const SpeedupArgs& sa, const RateArgs& ra, const std::string& x0_text, double t_end,
              double dt, const std::string& csv) {
  const auto s = sa.build();
  const auto a = solve_p(s, ra.resolve());
  std::vector<double> x0(s.degree(), 0.0);
  if (!x0_text.empty()) {
    x0 = text::to_doubles(x0_text, ',', "x0");
    if (x0.size() != s.degree()) {
      throw Error(Errc::ConfigInvalid, "x0 needs " + std::to_string(s.degree()) + " values");
    }
  }
  const auto traj = integrate({x0, 0.0}, a, t_end, dt);
  std::ofstream file;
  if (!csv.empty()) file = open_out(csv);
  std::ostream& out = csv.empty() ? std::cout : file;
  out << "t";
  for (std::size_t i = 1; i <= s.degree(); ++i) out << ",x" << i;
  out << ",l1_distance\n";
  for (const auto& st : traj) {
    double l1 = 0.0;
    out << text::num(st.t);
    for (std::size_t k = 0; k < st.x.size(); ++k) {
      out << ',' << text::num(st.x[k]);
      l1 += std::abs(st.x[k] - a.y_star[k]);
    }
    out << ',' << text::num(l1) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal server allocation for moldable jobs in loss systems"};
  app.require_subcommand(1);
  std::size_t workers = default_workers();
  app.add_option("-j,--workers", workers, "worker threads (default: MOLDALLOC_WORKERS or all cores)");

  SpeedupArgs solve_s;
  RateArgs solve_r;
  std::string solve_csv;
  auto* solve = app.add_subcommand("solve", "optimal allocation y*, p* and D* for one arrival rate");
  solve_s.add(solve);
  solve_r.add(solve, false);
  solve->add_option("--csv", solve_csv, "also write y* and p* as CSV");

  std::string config, output_dir, target = "l1";
  bool paper_scale = false;
  auto* simulate = app.add_subcommand("simulate", "run a simulation campaign from a config file");
  simulate->add_option("config", config, "experiment file (key = value)")->required()->check(CLI::ExistingFile);
  simulate->add_flag("--paper-scale", paper_scale, "5e6 arrivals x 100 replications per cell");
  simulate->add_option("-o,--output-dir", output_dir, "override output_dir");

  auto* convergence = app.add_subcommand("convergence", "fit log(metric) against log(n) over n_grid");
  convergence->alias("sweep");
  convergence->add_option("config", config, "experiment file (key = value)")->required()->check(CLI::ExistingFile);
  convergence->add_option("-t,--target", target, "l1 | blocking | exec_gap (default l1)");
  convergence->add_flag("--paper-scale", paper_scale, "5e6 arrivals x 100 replications per cell");
  convergence->add_option("-o,--output-dir", output_dir, "override output_dir");

  SpeedupArgs exact_s;
  RateArgs exact_r;
  std::string exact_scheme = "greedy_pstar";
  auto* exact = app.add_subcommand("exact", "stationary metrics of a small system by exact CTMC solve");
  exact_s.add(exact);
  exact_r.add(exact, true);
  exact->add_option("--scheme", exact_scheme, "greedy_pstar | greedy");

  std::string classes_path, hetero_csv;
  auto* hetero = app.add_subcommand("hetero", "capacity split across heterogeneous job classes");
  hetero->add_option("classes", classes_path, "lines of 'arrival_share mean_size speedup'")
      ->required()
      ->check(CLI::ExistingFile);
  hetero->add_option("--csv", hetero_csv, "also write the split as CSV");

  SpeedupArgs fluid_s;
  RateArgs fluid_r;
  std::string x0_text, fluid_csv;
  double t_end = 10.0, dt = 1e-2;
  auto* fluid = app.add_subcommand("fluid", "integrate the fluid limit from x0 and print the trajectory");
  fluid_s.add(fluid);
  fluid_r.add(fluid, false);
  fluid->add_option("--x0", x0_text, "initial occupancy x1,...,xd (default: empty system)");
  fluid->add_option("--t-end", t_end, "horizon (default 10)");
  fluid->add_option("--dt", dt, "RK4 step (default 0.01)");
  fluid->add_option("--csv", fluid_csv, "write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  std::signal(SIGINT, on_sigint);
  try {
    if (*solve) return cmd_solve(solve_s, solve_r, solve_csv);
    if (*simulate) return cmd_simulate(config, paper_scale, output_dir, workers);
    if (*convergence) return cmd_convergence(config, target, paper_scale, output_dir, workers);
    if (*exact) {
      if (!exact_r.n) throw Error(Errc::ConfigInvalid, "exact needs -n");
      return cmd_exact(*exact_r.n, exact_s, exact_r, exact_scheme);
    }
    if (*hetero) return cmd_hetero(classes_path, hetero_csv);
    if (*fluid) return cmd_fluid(fluid_s, fluid_r, x0_text, t_end, dt, fluid_csv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kInvalid : kRuntime;
  } catch (const Interrupted&) {
    std::cerr << "interrupted\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kInvalid;
}
