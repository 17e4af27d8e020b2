#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "proxopt/errors.hpp"
#include "proxopt/gpa.hpp"
#include "proxopt/kkt.hpp"
#include "proxopt/ledger.hpp"
#include "proxopt/manifold.hpp"
#include "proxopt/newton.hpp"
#include "proxopt/trace.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

struct CombinedOptions {
  double gamma = 0.0;  ///< 0 selects γ* = min{1/(3L₁), R/L₀}
  SwitchRule switch_rule = SwitchRule::residual;
  long max_gpa_steps = 200000;
  long max_newton_steps = 200;
  int fallback_max = 20;
  double basin_margin = 0.0;
  bool descent_check = true;
  double rate_slack = 0.1;
  ManifoldTolerances tol{};
};

/// Whether the measured step counts respect N₁(C) and N₂(ε).
enum class Verdict { holds, violated, heuristic };

inline constexpr std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::heuristic: return "heuristic";
  }
  return "heuristic";
}

struct SolveResult {
  Vector x;               ///< final feasible point
  double residual = 0.0;  ///< ‖P_{T_x}f′(x)‖ at x
  bool converged = false;
  bool finished_in_gpa = false;  ///< ε reached before a certified handoff
  long n1_actual = 0;
  long n2_actual = 0;
  std::optional<std::int64_t> n1_bound;
  std::optional<std::int64_t> n2_bound;
  Verdict verdict = Verdict::heuristic;
  double gamma = 0.0;
  double C_initial = 0.0;
  double C_final = 0.0;
  std::optional<SwitchTerm> binding;
  int fallbacks = 0;
  std::vector<BasinCertificate> certificates;
  std::optional<NewtonResult> newton;
  Vector handoff_x;       ///< x̂₀ of the last handoff
  Vector handoff_lambda;  ///< λ₀ = λ_{x̂₀}
  IterationTrace trace;
  ConstantsLedger ledger;
};

namespace detail {

inline bool exact(const Constant& c) {
  return c.known() && c.source != Provenance::sampled;
}

inline void require(const Constant& c, const char* name) {
  if (!c.known()) {
    throw Error(ErrorKind::IncompleteLedger, std::string(name) + " is not set");
  }
}

inline void append_trace(IterationTrace& into, IterationTrace rows, bool skip_first) {
  auto first = rows.begin();
  if (skip_first && first != rows.end()) ++first;
  into.insert(into.end(), std::make_move_iterator(first),
              std::make_move_iterator(rows.end()));
}

}  // namespace detail

/**
 * The full two-phase solve:
 *   1. gradient projection until the switching rule fires at x̂₀;
 *   2. λ₀ = λ_{x̂₀}, freeze F′(x̂₀, λ₀) and certify the Newton basin;
 *   3. modified Newton iterations until the residual reaches eps.
 * A handoff that fails certification resumes the gradient phase with C
 * halved, up to fallback_max times. The gradient phase also stops on its own
 * once the residual reaches eps.
 */
inline SolveResult run_combined(const ObjectiveMap& objective,
                                const ConstraintMap& c, const Vector& x0,
                                const ConstantsLedger& ledger, double eps,
                                const CombinedOptions& opts = {}) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
  detail::require(ledger.L0, "L0");
  detail::require(ledger.L1, "L1");
  detail::require(ledger.R, "R");
  detail::require(ledger.L1F, "L1F");

  SolveResult result;
  result.ledger = ledger;

  ObjectiveMap obj = objective;
  obj.L0 = ledger.L0.value;
  obj.L1 = ledger.L1.value;
  ConstraintMap cons = c;
  cons.prox_radius = ledger.R.value;

  const auto bounds = step_size_bounds(obj.L0, obj.L1, cons.prox_radius);
  result.gamma = opts.gamma > 0.0 ? opts.gamma : bounds.gamma_opt;

  if (ledger.C.known()) {
    result.C_initial = ledger.C.value;
  } else {
    const auto sc = compute_switch_constant(ledger);
    result.C_initial = sc.value;
    result.binding = sc.binding;
    result.ledger.C.set(sc.value, combine({ledger.mu.source, ledger.beta.source,
                                           ledger.L1Fx.source, ledger.sigma0.source,
                                           ledger.L1F.source}));
  }
  if (!result.binding) {
    try {
      const auto sc = compute_switch_constant(ledger);
      if (sc.value == result.C_initial) result.binding = sc.binding;
    } catch (const Error&) {
    }
  }

  GpaConfig cfg;
  cfg.gamma = result.gamma;
  cfg.switch_rule = opts.switch_rule;
  cfg.max_steps = opts.max_gpa_steps;
  cfg.descent_check = opts.descent_check;
  cfg.stop_eps = eps;
  cfg.tol = opts.tol;

  Vector x = x0;
  double C = result.C_initial;
  for (int round = 0;; ++round) {
    cfg.switch_C = C;
    cfg.max_steps = opts.max_gpa_steps - result.n1_actual;
    GpaResult gpa;
    try {
      gpa = run_gpa(obj, cons, x, cfg, result.n1_actual);
    } catch (const MaxStepsExceeded& e) {
      IterationTrace trace = std::move(result.trace);
      detail::append_trace(trace, e.trace(), round > 0);
      throw MaxStepsExceeded(e.message(), std::move(trace));
    }
    result.n1_actual += gpa.steps;
    detail::append_trace(result.trace, std::move(gpa.trace), round > 0);
    x = gpa.x;
    result.C_final = C;

    if (gpa.stop == GpaStop::converged) {
      result.finished_in_gpa = true;
      result.x = x;
      result.residual = gpa.residual;
      result.converged = true;
      break;
    }

    const KktPoint z0{x, lambda_x(obj, cons, x, opts.tol)};
    result.handoff_x = z0.x;
    result.handoff_lambda = z0.lambda;
    std::optional<FrozenKkt> frozen;
    BasinCertificate cert;
    try {
      frozen = FrozenKkt::freeze(obj, cons, z0, opts.tol.cond_tol);
      cert = basin_check(*frozen, obj, cons, ledger.L1F.value, opts.basin_margin);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularJacobian) throw;
      cert.h = std::numeric_limits<double>::infinity();
      cert.certified = false;
    }
    result.certificates.push_back(cert);

    if (cert.certified) {
      NewtonOptions nopts;
      nopts.max_steps = opts.max_newton_steps;
      nopts.rate_slack = opts.rate_slack;
      nopts.tol = opts.tol;
      NewtonResult nr;
      try {
        nr = run_newton(*frozen, obj, cons, eps, nopts, result.n1_actual);
      } catch (const MaxStepsExceeded& e) {
        IterationTrace trace = std::move(result.trace);
        detail::append_trace(trace, e.trace(), true);
        throw MaxStepsExceeded(e.message(), std::move(trace));
      }
      result.n2_actual = nr.steps;
      detail::append_trace(result.trace, nr.trace, true);
      result.x = nr.x_feasible;
      result.residual = nr.residual;
      result.converged = true;
      result.newton = std::move(nr);
      break;
    }

    if (round >= opts.fallback_max) {
      throw Error(ErrorKind::FallbackExhausted,
                  "Newton basin not certified after " +
                      std::to_string(opts.fallback_max) +
                      " halvings of the switching constant (last h = " +
                      std::to_string(cert.h) + ")");
    }
    ++result.fallbacks;
    C *= 0.5;
  }

  // Step-count bounds, judged only when every input constant is exact.
  const auto& l = result.ledger;
  if (l.delta_f.known() && result.gamma * obj.L1 < 1.0) {
    result.n1_bound = n1_bound(l.delta_f.value, result.gamma, obj.L1, result.C_initial);
  }
  if (l.sigma0.known() && l.beta.known() && l.beta.value > 0.0 && l.beta.value < 1.0) {
    result.n2_bound = n2_bound(result.C_initial, l.sigma0.value, l.beta.value, eps);
  }
  const bool exact_inputs = detail::exact(l.delta_f) && detail::exact(l.L1) &&
                            detail::exact(l.sigma0) && detail::exact(l.beta) &&
                            detail::exact(l.C);
  if (exact_inputs && result.fallbacks == 0 && result.n1_bound && result.n2_bound) {
    const bool ok = result.n1_actual <= *result.n1_bound &&
                    result.n2_actual <= *result.n2_bound;
    result.verdict = ok ? Verdict::holds : Verdict::violated;
  } else {
    result.verdict = Verdict::heuristic;
  }
  return result;
}

/// Outcome of one start of a multi-start run.
struct StartOutcome {
  std::optional<SolveResult> result;
  std::optional<ErrorKind> error_kind;
  std::string error;
};

/**
 * Independent solves from several starts, fanned out over worker threads.
 * Outcomes are returned in start order regardless of scheduling.
 */
inline std::vector<StartOutcome> run_multistart(const ObjectiveMap& obj,
                                                const ConstraintMap& c,
                                                const std::vector<Vector>& starts,
                                                const ConstantsLedger& ledger,
                                                double eps,
                                                const CombinedOptions& opts = {},
                                                unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<StartOutcome> out(starts.size());
  auto solve_one = [&](std::size_t i) {
    try {
      out[i].result = run_combined(obj, c, starts[i], ledger, eps, opts);
    } catch (const Error& e) {
      out[i].error_kind = e.kind();
      out[i].error = e.what();
    }
  };
  std::vector<std::future<void>> workers;
  for (unsigned t = 0; t < threads; ++t) {
    workers.push_back(std::async(std::launch::async, [&, t] {
      for (std::size_t i = t; i < starts.size(); i += threads) solve_one(i);
    }));
  }
  for (auto& w : workers) w.get();
  return out;
}

}  // namespace proxopt
