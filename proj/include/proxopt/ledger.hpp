#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "proxopt/diagnostics.hpp"
#include "proxopt/errors.hpp"
#include "proxopt/gpa.hpp"
#include "proxopt/kkt.hpp"
#include "proxopt/manifold.hpp"
#include "proxopt/problems.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

/// A numerical constant together with where its value came from.
struct Constant {
  double value = std::numeric_limits<double>::quiet_NaN();
  Provenance source = Provenance::unset;

  bool known() const { return source != Provenance::unset && std::isfinite(value); }
  void set(double v, Provenance p) {
    value = v;
    source = p;
  }
};

/**
 * Every constant the combined algorithm and its bounds depend on.
 *
 *   gamma0  min{1/L₁, R/L₀}
 *   nu      gEB constant μ/(1 + L₁γ₀ + μγ₀)
 *   sigma0  max ‖F′(x*, λ_{x*})⁻¹‖ over the stationary set
 *   L1F     Lipschitz constant of z ↦ F′(z)
 *   L1Fx    Lipschitz constant of x ↦ F′(x, λ_x) on S
 *   d, r    neighborhood radius of Ω and r = d·sqrt(1 + L_λ²)
 *   C       GPA → Newton switching threshold
 */
struct ConstantsLedger {
  Constant L0, L1, R, mu, nu, gamma0, sigma0, beta, L1F, L1Fx, L_lambda, d, r, C,
      delta_f;

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("L0", L0);
    fn("L1", L1);
    fn("R", R);
    fn("mu", mu);
    fn("nu", nu);
    fn("gamma0", gamma0);
    fn("sigma0", sigma0);
    fn("beta", beta);
    fn("L1F", L1F);
    fn("L1Fx", L1Fx);
    fn("L_lambda", L_lambda);
    fn("d", d);
    fn("r", r);
    fn("C", C);
    fn("delta_f", delta_f);
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    const_cast<ConstantsLedger*>(this)->for_each(
        [&](const char* name, Constant& c) { fn(name, static_cast<const Constant&>(c)); });
  }

  Constant* find(std::string_view name) {
    Constant* hit = nullptr;
    for_each([&](const char* n, Constant& c) {
      if (name == n) hit = &c;
    });
    return hit;
  }
};

/// Sampled dominates user, user dominates closed_form; unset dominates all.
inline Provenance combine(std::initializer_list<Provenance> sources) {
  bool sampled = false;
  bool user = false;
  for (Provenance p : sources) {
    if (p == Provenance::unset) return Provenance::unset;
    sampled = sampled || p == Provenance::sampled;
    user = user || p == Provenance::user;
  }
  if (sampled) return Provenance::sampled;
  if (user) return Provenance::user;
  return Provenance::closed_form;
}

enum class SwitchTerm { error_bound, newton_basin };

inline constexpr std::string_view to_string(SwitchTerm t) {
  return t == SwitchTerm::error_bound ? "error_bound" : "newton_basin";
}

struct SwitchConstant {
  double value = 0.0;
  SwitchTerm binding = SwitchTerm::error_bound;
  double error_bound_term = 0.0;   ///< μβ/(L_{1,Fx}σ₀)
  double newton_basin_term = 0.0;  ///< (1−β)²/(4L_{1,F}σ₀²)
};

/// C = min{μβ/(L_{1,Fx}σ₀), (1−β)²/(4L_{1,F}σ₀²)}.
inline SwitchConstant compute_switch_constant(const ConstantsLedger& ledger,
                                              double beta_min = 1e-3) {
  std::string missing;
  auto need = [&](const char* name, const Constant& c) {
    if (!c.known() || !(c.value > 0.0)) missing += std::string(missing.empty() ? "" : ", ") + name;
  };
  need("mu", ledger.mu);
  need("beta", ledger.beta);
  need("L1Fx", ledger.L1Fx);
  need("sigma0", ledger.sigma0);
  need("L1F", ledger.L1F);
  if (!missing.empty()) {
    throw Error(ErrorKind::IncompleteLedger, "missing or non-positive: " + missing);
  }
  const double beta = ledger.beta.value;
  if (!(beta >= beta_min && beta < 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "beta must lie in [" + std::to_string(beta_min) + ", 1)");
  }
  SwitchConstant out;
  out.error_bound_term =
      ledger.mu.value * beta / (ledger.L1Fx.value * ledger.sigma0.value);
  out.newton_basin_term = (1.0 - beta) * (1.0 - beta) /
                          (4.0 * ledger.L1F.value * ledger.sigma0.value *
                           ledger.sigma0.value);
  if (out.error_bound_term <= out.newton_basin_term) {
    out.value = out.error_bound_term;
    out.binding = SwitchTerm::error_bound;
  } else {
    out.value = out.newton_basin_term;
    out.binding = SwitchTerm::newton_basin;
  }
  return out;
}

/// Whether the convergence hypotheses linking β, d and r hold. Empty when a
/// needed constant is unknown.
struct HypothesisCheck {
  std::optional<bool> beta_within_neighborhood;  ///< β ≤ L_{1,Fx}σ₀d
  std::optional<bool> basin_within_radius;       ///< (1−β)/(2σ₀L_{1,F}) ≤ r
};

inline HypothesisCheck check_hypotheses(const ConstantsLedger& l) {
  HypothesisCheck h;
  if (l.beta.known() && l.L1Fx.known() && l.sigma0.known() && l.d.known()) {
    h.beta_within_neighborhood = l.beta.value <= l.L1Fx.value * l.sigma0.value * l.d.value;
  }
  if (l.beta.known() && l.sigma0.known() && l.L1F.known() && l.r.known()) {
    h.basin_within_radius =
        (1.0 - l.beta.value) / (2.0 * l.sigma0.value * l.L1F.value) <= l.r.value;
  }
  return h;
}

/// Inputs for estimate_ledger beyond the problem evaluators.
struct LedgerHints {
  ConstantsLedger known;                ///< fields already fixed, with provenance
  std::optional<StationarySet> omega;   ///< enumerated stationary points
  Sampler sampler;                      ///< feasible-point sampler for S
  std::optional<Vector> x0;             ///< start point, for delta_f
  std::optional<double> f_lower_bound;  ///< lower bound on f over S
  std::uint64_t seed = 0;
  int n_pairs = 200;
  long teb_samples = 2000;
};

namespace detail {

inline double spectral(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

/// Pairs of feasible points at mixed separations, from nearly coincident to
/// far apart.
inline std::pair<Vector, Vector> feasible_pair(const ConstraintMap& c,
                                               const Sampler& sampler, Rng& rng,
                                               bool near) {
  const Vector x = sampler(rng);
  if (!near) return {x, sampler(rng)};
  std::uniform_real_distribution<double> expo(-3.0, std::log10(0.5));
  const double len = c.prox_radius * std::pow(10.0, expo(rng));
  const Vector dir = tangent_project(c, x, gaussian_vector(c.n, rng));
  return {x, project(c, x + len * dir / std::max(dir.norm(), 1e-300))};
}

inline Vector tube_point(const ConstraintMap& c, const Sampler& sampler, Rng& rng) {
  std::uniform_real_distribution<double> unit;
  const Vector u = gaussian_vector(c.n, rng);
  return sampler(rng) + 0.5 * c.prox_radius * unit(rng) * u / u.norm();
}

}  // namespace detail

/**
 * Fills every unset ledger field it can:
 *  - L0, L1 from the objective if it carries them, else sampled;
 *  - L1F, L1Fx, L_lambda by pairwise sampling, inflated by 1.5;
 *  - sigma0 and d from the enumerated stationary set;
 *  - mu by the sampled tEB ratio when Ω is enumerated;
 *  - beta defaults to 0.5; nu, gamma0, r, C, delta_f derived.
 * Throws CannotEstimate when a field required for C or the step size has no
 * source.
 */
inline ConstantsLedger estimate_ledger(const ObjectiveMap& obj,
                                       const ConstraintMap& c,
                                       const LedgerHints& hints) {
  ConstantsLedger l = hints.known;
  Rng rng(hints.seed);
  const bool can_sample = static_cast<bool>(hints.sampler);
  auto cannot = [](const std::string& field, const std::string& why) {
    throw Error(ErrorKind::CannotEstimate, field + ": " + why);
  };

  if (!l.R.known()) {
    l.R.set(c.prox_radius,
            c.exact_projector ? Provenance::closed_form : Provenance::user);
  }

  if (!l.L0.known() && obj.L0_source != Provenance::unset && obj.L0 > 0.0) {
    l.L0.set(obj.L0, obj.L0_source);
  }
  if (!l.L1.known() && obj.L1_source != Provenance::unset && obj.L1 > 0.0) {
    l.L1.set(obj.L1, obj.L1_source);
  }
  if (!l.L0.known() || !l.L1.known()) {
    if (!can_sample) cannot("L0/L1", "no sampler and no user value");
    double best0 = 0.0;
    double best1 = 0.0;
    std::uniform_real_distribution<double> expo(-4.0, 0.0);
    for (int p = 0; p < hints.n_pairs; ++p) {
      const Vector a = detail::tube_point(c, hints.sampler, rng);
      Vector b;
      if (p % 2 == 0) {
        const Vector u = gaussian_vector(c.n, rng);
        b = a + c.prox_radius * std::pow(10.0, expo(rng)) * u / u.norm();
      } else {
        b = detail::tube_point(c, hints.sampler, rng);
      }
      const double dist = (a - b).norm();
      best0 = std::max(best0, std::abs(obj.eval_f(a) - obj.eval_f(b)) / dist);
      best1 = std::max(best1, (obj.eval_grad(a) - obj.eval_grad(b)).norm() / dist);
    }
    if (!l.L0.known()) l.L0.set(1.5 * best0, Provenance::sampled);
    if (!l.L1.known()) l.L1.set(1.5 * best1, Provenance::sampled);
  }

  if (!l.gamma0.known()) {
    l.gamma0.set(step_size_bounds(l.L0.value, l.L1.value, l.R.value).gamma_max,
                 combine({l.L0.source, l.L1.source, l.R.source}));
  }

  if (!l.L1F.known() || !l.L1Fx.known() || !l.L_lambda.known()) {
    if (!can_sample) cannot("L1F/L1Fx/L_lambda", "no sampler and no user value");
    double best_f = 0.0;
    double best_fx = 0.0;
    double best_lam = 0.0;
    std::normal_distribution<double> normal;
    for (int p = 0; p < hints.n_pairs; ++p) {
      const auto [x, y] = detail::feasible_pair(c, hints.sampler, rng, p % 2 == 0);
      const double dist = (x - y).norm();
      if (!(dist > 0.0)) continue;
      const Vector lx = lambda_x(obj, c, x);
      const Vector ly = lambda_x(obj, c, y);
      best_lam = std::max(best_lam, (lx - ly).norm() / dist);
      best_fx = std::max(best_fx, detail::spectral(eval_F_prime(obj, c, {x, lx}) -
                                                   eval_F_prime(obj, c, {y, ly})) /
                                      dist);
      // Off-manifold pair in the extended variable.
      KktPoint za{x + 0.1 * c.prox_radius * gaussian_vector(c.n, rng),
                  lx + 0.1 * (1.0 + lx.norm()) * gaussian_vector(c.m, rng)};
      KktPoint zb{y + 0.1 * c.prox_radius * gaussian_vector(c.n, rng),
                  ly + 0.1 * (1.0 + ly.norm()) * gaussian_vector(c.m, rng)};
      const double dz = (za.stacked() - zb.stacked()).norm();
      best_f = std::max(best_f, detail::spectral(eval_F_prime(obj, c, za) -
                                                 eval_F_prime(obj, c, zb)) /
                                    dz);
    }
    if (!l.L1F.known()) l.L1F.set(1.5 * best_f, Provenance::sampled);
    if (!l.L1Fx.known()) l.L1Fx.set(1.5 * best_fx, Provenance::sampled);
    if (!l.L_lambda.known()) l.L_lambda.set(1.5 * best_lam, Provenance::sampled);
  }

  const bool enumerated = hints.omega && hints.omega->complete;
  if (!l.sigma0.known()) {
    if (!hints.omega || hints.omega->points.empty()) {
      cannot("sigma0", "no enumerated stationary points and no user value");
    }
    const auto report = nondegeneracy_check(obj, c, *hints.omega);
    if (report.any_degenerate) cannot("sigma0", "a stationary point is degenerate");
    l.sigma0.set(report.sigma0, enumerated ? Provenance::closed_form : Provenance::sampled);
  }

  if (!l.mu.known()) {
    if (!enumerated) cannot("mu", "needs a complete stationary set");
    if (!can_sample) cannot("mu", "no sampler");
    const auto teb = verify_teb(obj, c, *hints.omega, hints.sampler,
                                hints.teb_samples, rng);
    if (teb.vacuous || !std::isfinite(teb.mu_hat)) cannot("mu", "tEB ratio undefined");
    l.mu.set(teb.mu_hat, Provenance::sampled);
  }

  if (!l.beta.known()) l.beta.set(0.5, Provenance::user);

  if (!l.nu.known()) {
    const double g0 = l.gamma0.value;
    l.nu.set(l.mu.value / (1.0 + l.L1.value * g0 + l.mu.value * g0),
             combine({l.mu.source, l.L1.source, l.gamma0.source}));
  }

  if (!l.d.known() && hints.omega && hints.omega->points.size() > 1) {
    double sep = std::numeric_limits<double>::infinity();
    const auto& pts = hints.omega->points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        sep = std::min(sep, (pts[i] - pts[j]).norm());
      }
    }
    l.d.set(0.5 * sep, enumerated ? Provenance::closed_form : Provenance::sampled);
  }
  if (!l.r.known() && l.d.known() && l.L_lambda.known()) {
    l.r.set(l.d.value * std::sqrt(1.0 + l.L_lambda.value * l.L_lambda.value),
            combine({l.d.source, l.L_lambda.source}));
  }

  if (!l.delta_f.known() && hints.x0) {
    const double f0 = obj.eval_f(*hints.x0);
    if (enumerated) {
      double fmin = std::numeric_limits<double>::infinity();
      for (const auto& p : hints.omega->points) fmin = std::min(fmin, obj.eval_f(p));
      l.delta_f.set(std::max(0.0, f0 - fmin), Provenance::closed_form);
    } else if (hints.f_lower_bound) {
      l.delta_f.set(std::max(0.0, f0 - *hints.f_lower_bound), Provenance::user);
    }
  }

  if (!l.C.known()) {
    l.C.set(compute_switch_constant(l).value,
            combine({l.mu.source, l.beta.source, l.L1Fx.source, l.sigma0.source,
                     l.L1F.source}));
  }
  return l;
}

/**
 * Closed-form ledger for f(x) = (Ax, x) on the unit sphere with distinct
 * eigenvalues λ₁ < … < λₙ and gaps μⱼ = min_{i≠j}|λᵢ − λⱼ|:
 *
 *   L₀ = L₁ = 2‖A‖,  R = 1,  μ = minⱼ μⱼ,  σ₀ = 1/min{2μ, 2},
 *   L_λ = λₙ − λ₁,  L_{1,Fx} = L_λ + sqrt(L_λ² + 4),  L_{1,F} = 4/√3,
 *   d = √2/2,  r = d·sqrt(1 + L_λ²).
 *
 * F′ is affine in z for this problem, so L_{1,F} is the exact supremum of
 * ‖[[2δλ·I, 2δx], [2δxᵀ, 0]]‖ over unit (δx, δλ).
 */
inline ConstantsLedger sphere_quadratic_ledger(const Matrix& a, double beta = 0.5,
                                               std::optional<Vector> x0 = std::nullopt) {
  const double mu = sphere_quadratic_mu(a);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()),
                                            Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  const double norm = ev.cwiseAbs().maxCoeff();
  const double spread = ev(ev.size() - 1) - ev(0);
  constexpr auto cf = Provenance::closed_form;

  ConstantsLedger l;
  l.L0.set(2.0 * norm, cf);
  l.L1.set(2.0 * norm, cf);
  l.R.set(1.0, cf);
  l.mu.set(mu, cf);
  l.sigma0.set(1.0 / std::min(2.0 * mu, 2.0), cf);
  l.L_lambda.set(spread, cf);
  l.L1Fx.set(spread + std::sqrt(spread * spread + 4.0), cf);
  l.L1F.set(4.0 / std::sqrt(3.0), cf);
  l.d.set(std::sqrt(2.0) / 2.0, cf);
  l.r.set(l.d.value * std::sqrt(1.0 + spread * spread), cf);
  l.beta.set(beta, Provenance::user);
  l.gamma0.set(step_size_bounds(l.L0.value, l.L1.value, 1.0).gamma_max, cf);
  l.nu.set(mu / (1.0 + l.L1.value * l.gamma0.value + mu * l.gamma0.value), cf);
  l.C.set(compute_switch_constant(l).value, combine({cf, l.beta.source}));
  if (x0) {
    l.delta_f.set(std::max(0.0, x0->dot(0.5 * (a + a.transpose()) * *x0) - ev(0)), cf);
  }
  return l;
}

}  // namespace proxopt
