#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "proxopt/errors.hpp"
#include "proxopt/kkt.hpp"
#include "proxopt/manifold.hpp"
#include "proxopt/trace.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

struct StepSizeBounds {
  double gamma_max = 0.0;  ///< min{1/L₁, R/L₀}, exclusive upper bound
  double gamma_opt = 0.0;  ///< min{1/(3L₁), R/L₀}, minimizes the N₁ factor
};

inline StepSizeBounds step_size_bounds(double L0, double L1, double R) {
  if (!(L0 > 0.0) || !(L1 > 0.0) || !(R > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "L0, L1 and R must all be positive");
  }
  return {std::min(1.0 / L1, R / L0), std::min(1.0 / (3.0 * L1), R / L0)};
}

enum class SwitchRule { residual, step_length };

struct GpaConfig {
  double gamma = 0.0;
  double switch_C = 0.0;
  SwitchRule switch_rule = SwitchRule::residual;
  long max_steps = 100000;
  bool descent_check = true;
  /// Stop as converged once the residual reaches this value (0 disables).
  double stop_eps = 0.0;
  ManifoldTolerances tol{};
};

/// Outcome of one projected-gradient step with its descent bookkeeping.
struct GpaStep {
  Vector x;
  double f_before = 0.0;
  double f_after = 0.0;
  double step_len = 0.0;
  double descent_margin = 0.0;  ///< ½(1/γ − L₁)‖Δx‖²
  bool descent_ok = true;
};

namespace detail {

inline double descent_slack(double f) { return 1e-12 * (1.0 + std::abs(f)); }

/// Rounding floor for inequalities whose right-hand side can vanish.
inline double rounding_floor(double scale) {
  return 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + scale);
}

}  // namespace detail

/**
 * x⁺ = P_S(x − γf′(x)) together with the check
 * f(x⁺) ≤ f(x) − ½(1/γ − L₁)‖x⁺ − x‖² (up to a 1e-12 relative slack).
 * With descent_check set, a violation throws DescentViolation: it means the
 * supplied L₁ (or L₀, R) is wrong.
 */
inline GpaStep gpa_step_checked(const ObjectiveMap& obj, const ConstraintMap& c,
                                const Vector& x, double gamma,
                                bool descent_check = true,
                                const ManifoldTolerances& tol = {}) {
  GpaStep out;
  out.f_before = obj.eval_f(x);
  out.x = project(c, x - gamma * obj.eval_grad(x), tol);
  out.f_after = obj.eval_f(out.x);
  out.step_len = (out.x - x).norm();
  out.descent_margin =
      0.5 * (1.0 / gamma - obj.L1) * out.step_len * out.step_len;
  out.descent_ok = out.f_after <= out.f_before - out.descent_margin +
                                      detail::descent_slack(out.f_before);
  if (descent_check && !out.descent_ok) {
    throw Error(ErrorKind::DescentViolation,
                "f rose from " + std::to_string(out.f_before) + " to " +
                    std::to_string(out.f_after) +
                    "; the supplied Lipschitz constants are inconsistent "
                    "with the objective");
  }
  return out;
}

inline Vector gpa_step(const ObjectiveMap& obj, const ConstraintMap& c,
                       const Vector& x, double gamma,
                       bool descent_check = true,
                       const ManifoldTolerances& tol = {}) {
  return gpa_step_checked(obj, c, x, gamma, descent_check, tol).x;
}

/// g_γ(x) = (x − P_S(x − γf′(x)))/γ.
inline Vector gradient_mapping(const ObjectiveMap& obj, const ConstraintMap& c,
                               const Vector& x, double gamma,
                               const ManifoldTolerances& tol = {}) {
  return (x - gpa_step(obj, c, x, gamma, false, tol)) / gamma;
}

/**
 * Step count after which some iterate is guaranteed to satisfy
 * ‖P_{T_x}f′(x)‖ ≤ C:  ⌈2Δf(1 + γL₁)² / (C²γ(1 − γL₁))⌉.
 * Saturates at INT64_MAX.
 */
inline std::int64_t n1_bound(double delta_f, double gamma, double L1,
                             double C) {
  if (!(gamma > 0.0) || !(gamma * L1 < 1.0) || !(C > 0.0) ||
      !(delta_f >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "n1_bound needs 0 < gamma < 1/L1, C > 0, delta_f >= 0");
  }
  const double t = gamma * L1;
  const double value =
      2.0 * delta_f * (1.0 + t) * (1.0 + t) / (C * C * gamma * (1.0 - t));
  const double ceiled = std::ceil(value);
  if (!(ceiled < 9.2e18)) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(ceiled);
}

enum class GpaStop { switched, converged };

struct GpaResult {
  Vector x;
  IterationTrace trace;
  long steps = 0;
  GpaStop stop = GpaStop::switched;
  double residual = 0.0;
};

namespace detail {

inline void validate_gpa(const ObjectiveMap& obj, const ConstraintMap& c,
                         const GpaConfig& cfg) {
  const auto bounds = step_size_bounds(obj.L0, obj.L1, c.prox_radius);
  if (!(cfg.gamma > 0.0) || !(cfg.gamma < bounds.gamma_max)) {
    throw Error(ErrorKind::InvalidArgument,
                "step size " + std::to_string(cfg.gamma) +
                    " outside (0, " + std::to_string(bounds.gamma_max) + ")");
  }
  if (!(cfg.switch_C > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "switching constant must be positive");
  }
}

}  // namespace detail

/**
 * Gradient projection with a fixed step until the switching rule fires:
 *
 *   residual:     ‖P_{T_{x_k}}f′(x_k)‖ ≤ C
 *   step_length:  ‖x_k − x_{k−1}‖ ≤ γC/(1 + γL₁),  k ≥ 1
 *
 * Trace rows are numbered from k_offset so resumed runs continue the count.
 * Row k_offset describes x0 itself. Throws MaxStepsExceeded (carrying the
 * trace) when the budget runs out.
 */
inline GpaResult run_gpa(const ObjectiveMap& obj, const ConstraintMap& c,
                         const Vector& x0, const GpaConfig& cfg,
                         long k_offset = 0) {
  detail::validate_gpa(obj, c, cfg);
  detail::check_dims(c, x0);
  if (c.eval_g(x0).norm() > cfg.tol.feas_tol) {
    throw Error(ErrorKind::InvalidArgument, "starting point is not on S");
  }

  const double gamma = cfg.gamma;
  const double step_threshold = gamma * cfg.switch_C / (1.0 + gamma * obj.L1);

  GpaResult result;
  result.x = x0;
  result.residual = stationarity_residual(obj, c, x0, cfg.tol);
  {
    TraceRow row;
    row.k = k_offset;
    row.phase = Phase::gpa;
    row.f = obj.eval_f(x0);
    row.residual = result.residual;
    row.kkt_norm = result.residual;
    row.x = x0;
    result.trace.push_back(std::move(row));
  }

  auto residual_switch = [&] {
    return cfg.switch_rule == SwitchRule::residual &&
           result.residual <= cfg.switch_C;
  };
  // Once C has fallen below eps a handoff can no longer help.
  const bool eps_first = cfg.stop_eps > cfg.switch_C;
  auto converged = [&] {
    return cfg.stop_eps > 0.0 && result.residual <= cfg.stop_eps;
  };
  if (eps_first && converged()) {
    result.stop = GpaStop::converged;
    return result;
  }
  if (residual_switch()) return result;
  if (converged()) {
    result.stop = GpaStop::converged;
    return result;
  }

  while (result.steps < cfg.max_steps) {
    const GpaStep step =
        gpa_step_checked(obj, c, result.x, gamma, cfg.descent_check, cfg.tol);
    ++result.steps;
    result.x = step.x;
    const Vector grad = obj.eval_grad(result.x);
    result.residual = tangent_project(c, result.x, grad, cfg.tol).norm();

    TraceRow row;
    row.k = k_offset + result.steps;
    row.phase = Phase::gpa;
    row.f = step.f_after;
    row.residual = result.residual;
    row.step_len = step.step_len;
    row.descent_ok = step.descent_ok;
    row.residual_ineq_ok =
        result.residual <= (1.0 / gamma + obj.L1) * step.step_len * (1.0 + 1e-9) +
                               detail::rounding_floor(grad.norm());
    row.kkt_norm = result.residual;
    row.x = result.x;
    result.trace.push_back(std::move(row));

    if (eps_first && converged()) {
      result.stop = GpaStop::converged;
      return result;
    }
    if (residual_switch()) return result;
    if (cfg.switch_rule == SwitchRule::step_length &&
        step.step_len <= step_threshold) {
      return result;
    }
    if (converged()) {
      result.stop = GpaStop::converged;
      return result;
    }
  }
  throw MaxStepsExceeded("gradient phase did not reach the switching "
                         "condition within " +
                             std::to_string(cfg.max_steps) + " steps",
                         std::move(result.trace));
}

}  // namespace proxopt
