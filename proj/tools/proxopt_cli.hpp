#pragma once

// Command-line front end: solve | verify | sweep.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "proxopt/io.hpp"
#include "proxopt/proxopt.hpp"

namespace proxopt::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kBudget = 2 };

struct RunConfig {
  std::string problem = "sphere";  // sphere | stiefel | custom
  std::string plugin;              // custom problem name
  std::vector<double> spectrum;
  long n = 0;
  long k = 0;
  double eps = 1e-10;
  double gamma = 0.0;
  std::string switch_rule = "residual";
  double beta = 0.5;
  double switch_c = 0.0;  // ledger override of C; 0 keeps the computed value
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  long max_steps = 200000;
  long samples = 2000;
  bool fd_only = false;
  int grid_points = 50;
  std::vector<double> gammas;
};

/// Verbosity from PROXOPT_LOG: 0 errors only (default), 1 info, 2 debug.
inline int log_level() {
  const char* env = std::getenv("PROXOPT_LOG");
  if (!env) return 0;
  const std::string v(env);
  if (v == "debug" || v == "2") return 2;
  if (v == "info" || v == "1") return 1;
  return 0;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(log_level()) {}
  void info(const std::string& msg) const {
    if (level_ >= 1) err_ << "[proxopt] " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= 2) err_ << "[proxopt:debug] " << msg << '\n';
  }
  void error(const std::string& msg) const { err_ << "proxopt: error: " << msg << '\n'; }

 private:
  std::ostream& err_;
  int level_;
};

/// A problem instance ready to run, with whatever oracles it admits.
struct Instance {
  Problem problem;
  ConstantsLedger ledger;
  Vector x0;
  std::optional<StationarySet> omega;
  std::optional<double> mu_exact;
};

namespace detail {

inline std::vector<double> default_spectrum(long n) {
  std::vector<double> s;
  for (long i = 1; i <= n; ++i) s.push_back(static_cast<double>(i));
  return s;
}

inline Rng start_rng(std::uint64_t seed) { return Rng(seed ^ 0x5DEECE66DULL); }

/// Ledger for problems without an enumerable stationary set: closed-form
/// L0/L1/R, sampled L1F, user-supplied C.
inline ConstantsLedger partial_ledger(const Problem& p, const Vector& x0,
                                      const RunConfig& cfg, double default_c,
                                      std::optional<double> f_min) {
  ConstantsLedger l;
  l.L0.set(p.objective.L0, p.objective.L0_source);
  l.L1.set(p.objective.L1, p.objective.L1_source);
  l.R.set(p.constraint.prox_radius, Provenance::closed_form);
  l.gamma0.set(step_size_bounds(l.L0.value, l.L1.value, l.R.value).gamma_max,
               combine({l.L0.source, l.L1.source}));
  Rng rng(cfg.seed + 17);
  const KktPoint z0{x0, lambda_x(p.objective, p.constraint, x0)};
  l.L1F.set(estimate_L1F(p.objective, p.constraint, z0, 1.0, 200, rng),
            Provenance::sampled);
  l.beta.set(cfg.beta, Provenance::user);
  l.C.set(cfg.switch_c > 0.0 ? cfg.switch_c : default_c, Provenance::user);
  if (f_min) {
    l.delta_f.set(std::max(0.0, p.objective.eval_f(x0) - *f_min), Provenance::closed_form);
  }
  return l;
}

/// (Ax, x) on the ellipsoid Σ xᵢ²/aᵢ² = 1 with aᵢ = 1 + 0.1·i; uses the
/// generic level-set projection.
inline Problem ellipsoid_quadratic(const Matrix& a) {
  const Index n = a.rows();
  Vector axes(n);
  for (Index i = 0; i < n; ++i) axes(i) = 1.0 + 0.1 * static_cast<double>(i);
  const Vector w = axes.array().square().inverse().matrix();
  Problem p = sphere_quadratic(a);
  p.name = "ellipsoid_quadratic";
  const double amin = axes.minCoeff();
  const double amax = axes.maxCoeff();
  p.constraint = levelset_constraint(
      n, 1,
      [w](const Vector& x) {
        Vector g(1);
        g(0) = x.dot(w.asDiagonal() * x) - 1.0;
        return g;
      },
      [w](const Vector& x) { return Matrix(2.0 * (w.asDiagonal() * x).transpose()); },
      [w](const Vector&) { return std::vector<Matrix>{Matrix(2.0 * w.asDiagonal())}; },
      amin * amin / amax);
  p.sampler = [w, n](Rng& rng) {
    const Vector v = gaussian_vector(n, rng);
    return Vector(v / std::sqrt(v.dot(w.asDiagonal() * v)));
  };
  p.objective.L0 *= amax;
  return p;
}

}  // namespace detail

/// Builds the configured problem, its start point and ledger.
inline Instance build_instance(const RunConfig& cfg) {
  Instance inst;
  Rng rng = detail::start_rng(cfg.seed);
  if (cfg.problem == "sphere") {
    std::vector<double> eigs = cfg.spectrum;
    if (eigs.empty()) eigs = detail::default_spectrum(cfg.n > 0 ? cfg.n : 10);
    if (eigs.size() < 2) throw Error(ErrorKind::InvalidArgument, "sphere needs n >= 2");
    const Matrix a = symmetric_from_spectrum(eigs, cfg.seed);
    inst.omega = stationary_points_sphere_quadratic(a);
    inst.mu_exact = sphere_quadratic_mu(a);
    inst.problem = sphere_quadratic(a);
    inst.x0 = inst.problem.sampler(rng);
    inst.ledger = sphere_quadratic_ledger(a, cfg.beta, inst.x0);
    if (cfg.switch_c > 0.0) inst.ledger.C.set(cfg.switch_c, Provenance::user);
    return inst;
  }
  if (cfg.problem == "stiefel") {
    std::vector<double> eigs = cfg.spectrum;
    const long n = !eigs.empty() ? static_cast<long>(eigs.size()) : (cfg.n > 0 ? cfg.n : 20);
    const long k = cfg.k > 0 ? cfg.k : 3;
    if (eigs.empty()) eigs = detail::default_spectrum(n);
    if (k > n) throw Error(ErrorKind::InvalidArgument, "stiefel needs k <= n");
    const Matrix a = symmetric_from_spectrum(eigs, cfg.seed);
    inst.problem = stiefel_quadratic(a, k);
    inst.x0 = inst.problem.sampler(rng);
    std::vector<double> sorted = eigs;
    std::sort(sorted.begin(), sorted.end());
    double fmin = 0.0;
    for (long i = 0; i < k; ++i) fmin += sorted[static_cast<size_t>(i)];
    inst.ledger = detail::partial_ledger(inst.problem, inst.x0, cfg, 1e-2, fmin);
    return inst;
  }
  if (cfg.problem == "custom") {
    std::vector<double> eigs = cfg.spectrum;
    if (eigs.empty()) eigs = detail::default_spectrum(cfg.n > 0 ? cfg.n : 5);
    const Matrix a = symmetric_from_spectrum(eigs, cfg.seed);
    if (cfg.plugin == "corrupted-gradient") {
      inst.problem = sphere_quadratic(a);
      inst.problem.name = "corrupted_gradient";
      const auto grad = inst.problem.objective.eval_grad;
      inst.problem.objective.eval_grad = [grad](const Vector& x) {
        Vector g = grad(x);
        g(0) += 0.01;
        return g;
      };
      inst.x0 = inst.problem.sampler(rng);
      inst.ledger = detail::partial_ledger(inst.problem, inst.x0, cfg, 1e-3, std::nullopt);
      return inst;
    }
    if (cfg.plugin == "ellipsoid") {
      inst.problem = detail::ellipsoid_quadratic(a);
      inst.x0 = inst.problem.sampler(rng);
      inst.ledger = detail::partial_ledger(inst.problem, inst.x0, cfg, 1e-3, std::nullopt);
      return inst;
    }
    throw Error(ErrorKind::InvalidArgument,
                "unknown plugin '" + cfg.plugin + "' (known: corrupted-gradient, ellipsoid)");
  }
  throw Error(ErrorKind::InvalidArgument, "unknown problem '" + cfg.problem + "'");
}

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MaxStepsExceeded:
    case ErrorKind::FallbackExhausted:
    case ErrorKind::DivergenceDetected:
    case ErrorKind::NoConvergence:
    case ErrorKind::DescentViolation:
    case ErrorKind::DerivativeMismatch:
      return kBudget;
    default:
      return kUsage;
  }
}

namespace detail {

inline void write_trace(const IterationTrace& trace, const RunConfig& cfg) {
  if (cfg.out.empty()) return;
  const std::string path = cfg.out + ".trace." + cfg.format;
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  if (cfg.format == "json") {
    os << io::trace_json(trace).dump(2) << '\n';
  } else {
    io::write_trace_csv(trace, os);
  }
}

inline void emit_json(const io::Json& j, const RunConfig& cfg, const std::string& suffix,
                      std::ostream& out) {
  if (cfg.out.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  const std::string path = cfg.out + suffix;
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  os << j.dump(2) << '\n';
}

}  // namespace detail

inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Log log(err);
  Instance inst;
  try {
    inst = build_instance(cfg);
  } catch (const Error& e) {
    log.error(e.what());
    return kUsage;
  }
  CombinedOptions opts;
  opts.gamma = cfg.gamma;
  opts.switch_rule = cfg.switch_rule == "step" ? SwitchRule::step_length : SwitchRule::residual;
  opts.max_gpa_steps = cfg.max_steps;
  opts.max_newton_steps = std::min<long>(cfg.max_steps, 200);
  log.info("problem " + inst.problem.name + ", n = " + std::to_string(inst.problem.constraint.n) +
           ", C = " + io::format_double(inst.ledger.C.value));
  try {
    const SolveResult r =
        run_combined(inst.problem.objective, inst.problem.constraint, inst.x0, inst.ledger,
                     cfg.eps, opts);
    detail::write_trace(r.trace, cfg);
    detail::emit_json(io::solve_result_json(r), cfg, ".result.json", out);
    log.info("gpa steps " + std::to_string(r.n1_actual) + ", newton steps " +
             std::to_string(r.n2_actual) + ", residual " + io::format_double(r.residual));
    return r.residual <= cfg.eps ? kOk : kBudget;
  } catch (const MaxStepsExceeded& e) {
    log.error(e.what());
    detail::write_trace(e.trace(), cfg);
    io::Json j;
    j["converged"] = false;
    j["error"] = e.what();
    j["trace_rows"] = e.trace().size();
    detail::emit_json(j, cfg, ".result.json", out);
    return kBudget;
  } catch (const Error& e) {
    log.error(e.what());
    io::Json j;
    j["converged"] = false;
    j["error"] = e.what();
    detail::emit_json(j, cfg, ".result.json", out);
    return exit_code_for(e.kind());
  }
}

inline int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Log log(err);
  Instance inst;
  try {
    inst = build_instance(cfg);
  } catch (const Error& e) {
    log.error(e.what());
    return kUsage;
  }
  const auto& obj = inst.problem.objective;
  const auto& c = inst.problem.constraint;
  io::Json report;
  report["problem"] = inst.problem.name;
  bool passed = true;
  io::Json errors = io::Json::array();
  io::Json checks;

  Rng rng(cfg.seed + 101);
  try {
    const FdReport fd = fd_consistency(obj, c, inst.problem.sampler, 20, rng);
    checks["fd"] = io::fd_json(fd);
  } catch (const DerivativeMismatch& e) {
    checks["fd"] = io::fd_json(e.report());
    errors.push_back(e.what());
    passed = false;
  }

  if (!cfg.fd_only) {
    if (inst.omega && inst.omega->complete) {
      try {
        const TebReport teb =
            verify_teb(obj, c, *inst.omega, inst.problem.sampler, cfg.samples, rng);
        io::Json tj = io::teb_json(teb);
        const bool ok = !inst.mu_exact || teb.mu_hat >= *inst.mu_exact * (1.0 - 1e-9);
        tj["passes"] = ok;
        checks["teb"] = tj;
        passed = passed && ok;
        if (inst.mu_exact) report["mu_exact"] = *inst.mu_exact;
        report["mu_hat"] = io::number(teb.mu_hat);

        const double g0 = inst.ledger.gamma0.value;
        std::vector<double> grid;
        for (int i = 1; i <= 10; ++i) grid.push_back(g0 * i / 11.0);
        const GebReport geb = verify_geb(obj, c, *inst.omega, grid, inst.problem.sampler,
                                         std::max<long>(cfg.samples / 10, 50), rng,
                                         inst.mu_exact);
        checks["geb"] = io::geb_json(geb);
        passed = passed && geb.passes;

        const NondegeneracyReport nd = nondegeneracy_check(obj, c, *inst.omega);
        checks["nondegeneracy"] = io::nondegeneracy_json(nd);
        passed = passed && !nd.any_degenerate;

        const InverseBoundReport ib = inverse_bound_check(
            obj, c, *inst.omega, inst.ledger.sigma0.value, inst.ledger.L1Fx.value,
            cfg.beta, std::max<long>(cfg.samples / 10, 50), rng);
        checks["inverse_bound"] = io::inverse_bound_json(ib);
        passed = passed && ib.violations == 0;
      } catch (const Error& e) {
        errors.push_back(e.what());
        passed = false;
      }
    } else {
      checks["stationary_set"] = "unavailable: no enumeration for this problem";
    }
  }
  report["checks"] = std::move(checks);
  report["errors"] = std::move(errors);
  report["passed"] = passed;
  try {
    detail::emit_json(report, cfg, ".verify.json", out);
  } catch (const Error& e) {
    log.error(e.what());
    return kUsage;
  }
  return passed ? kOk : kBudget;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Log log(err);
  Instance inst;
  try {
    inst = build_instance(cfg);
  } catch (const Error& e) {
    log.error(e.what());
    return kUsage;
  }
  const auto& l = inst.ledger;
  const auto bounds = step_size_bounds(l.L0.value, l.L1.value, l.R.value);
  const std::vector<double> grid =
      cfg.gammas.empty() ? default_gamma_grid(bounds.gamma_max, cfg.grid_points) : cfg.gammas;
  std::vector<SweepRow> rows;
  try {
    rows = gamma_sweep(inst.problem.objective, inst.problem.constraint, inst.x0, l, grid,
                       cfg.max_steps);
  } catch (const Error& e) {
    log.error(e.what());
    return exit_code_for(e.kind());
  }

  const auto best = bound_minimizer(rows);
  const double cell = grid.size() > 1 ? bounds.gamma_max / (grid.size() + 1) : 0.0;
  const bool near_opt =
      best && std::abs(*best - bounds.gamma_opt) <= cell * (1.0 + 1e-12);
  log.info("gamma* = " + io::format_double(bounds.gamma_opt) + ", bound minimizer = " +
           (best ? io::format_double(*best) : std::string("none")) +
           (near_opt ? " (within one cell)" : ""));

  std::ostringstream body;
  if (cfg.format == "json") {
    io::Json j;
    io::Json arr = io::Json::array();
    for (const auto& r : rows) {
      io::Json rj;
      rj["gamma"] = r.gamma;
      rj["accepted"] = r.accepted;
      rj["n1_actual"] = r.n1_actual;
      rj["n1_bound"] = r.n1_bound;
      rj["reason"] = r.reason;
      arr.push_back(std::move(rj));
    }
    j["rows"] = std::move(arr);
    j["gamma_star"] = bounds.gamma_opt;
    j["bound_minimizer"] = best ? io::Json(*best) : io::Json(nullptr);
    j["within_one_cell"] = near_opt;
    body << j.dump(2) << '\n';
  } else {
    body << "gamma,accepted,n1_actual,n1_bound,reason\n";
    for (const auto& r : rows) {
      body << io::format_double(r.gamma) << ',' << (r.accepted ? 1 : 0) << ','
           << r.n1_actual << ',' << r.n1_bound << ",\"" << r.reason << "\"\n";
    }
  }
  if (cfg.out.empty()) {
    out << body.str();
  } else {
    const std::string path = cfg.out + ".sweep." + cfg.format;
    std::ofstream os(path);
    if (!os) {
      log.error("cannot write " + path);
      return kUsage;
    }
    os << body.str();
  }
  return kOk;
}

inline void add_common_options(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--problem", cfg.problem, "sphere | stiefel | custom")
      ->check(CLI::IsMember({"sphere", "stiefel", "custom"}));
  sub.add_option("--plugin", cfg.plugin, "custom problem: corrupted-gradient | ellipsoid");
  sub.add_option("--spectrum", cfg.spectrum, "eigenvalues of A, comma separated")
      ->delimiter(',');
  sub.add_option("--n", cfg.n, "ambient dimension (default spectrum 1..n)");
  sub.add_option("--k", cfg.k, "frame columns for stiefel");
  sub.add_option("--eps", cfg.eps, "target stationarity residual")->check(CLI::PositiveNumber);
  sub.add_option("--gamma", cfg.gamma, "fixed step size (default min{1/(3L1), R/L0})");
  sub.add_option("--switch-rule", cfg.switch_rule, "residual | step")
      ->check(CLI::IsMember({"residual", "step"}));
  sub.add_option("--beta", cfg.beta, "switching parameter in (0,1)");
  sub.add_option("--switch-c", cfg.switch_c, "override the switching constant C");
  sub.add_option("--seed", cfg.seed, "RNG seed for problem and start point");
  sub.add_option("--out", cfg.out, "output path prefix");
  sub.add_option("--format", cfg.format, "trace format: csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  sub.add_option("--max-steps", cfg.max_steps, "iteration budget")->check(CLI::PositiveNumber);
}

/// Parses argv and dispatches; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"proxopt: gradient projection finalized by modified Newton"};
  app.set_config("--config", "", "TOML config file with the same keys as the flags");
  app.require_subcommand(1);
  RunConfig cfg;

  auto* solve = app.add_subcommand("solve", "run the combined solver");
  add_common_options(*solve, cfg);

  auto* verify = app.add_subcommand("verify", "check error bounds, nondegeneracy, derivatives");
  add_common_options(*verify, cfg);
  verify->add_flag("--fd-only", cfg.fd_only, "only run derivative checks");
  verify->add_option("--samples", cfg.samples, "sample count for the tEB check");

  auto* sweep = app.add_subcommand("sweep", "step-size sweep of the GPA phase");
  add_common_options(*sweep, cfg);
  sweep->add_option("--grid-points", cfg.grid_points, "grid size inside (0, gamma_max)")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--gammas", cfg.gammas, "explicit step sizes, comma separated")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "proxopt: " << e.what() << '\n';
    return kUsage;
  }
  if (cfg.format != "csv" && cfg.format != "json") return kUsage;

  if (solve->parsed()) return cmd_solve(cfg, out, err);
  if (verify->parsed()) return cmd_verify(cfg, out, err);
  return cmd_sweep(cfg, out, err);
}

}  // namespace proxopt::cli
