#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "proxopt/errors.hpp"
#include "proxopt/gpa.hpp"
#include "proxopt/kkt.hpp"
#include "proxopt/manifold.hpp"
#include "proxopt/problems.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

/// Enumerated stationary points with their multipliers and the smallest
/// singular value of F′(x*, λ_{x*}) at each.
struct StationarySet {
  std::vector<Vector> points;
  std::vector<Vector> multipliers;
  std::vector<double> sigma_values;
  bool complete = false;
};

inline double min_singular_value(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

namespace detail {

inline Eigen::SelfAdjointEigenSolver<Matrix> distinct_spectrum(const Matrix& a,
                                                               double eig_tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
  const Vector& ev = eig.eigenvalues();
  for (Index i = 1; i < ev.size(); ++i) {
    if (ev(i) - ev(i - 1) <= eig_tol) {
      throw Error(ErrorKind::DegenerateSpectrum,
                  "eigenvalues " + std::to_string(ev(i - 1)) + " and " +
                      std::to_string(ev(i)) + " are not separated");
    }
  }
  return eig;
}

}  // namespace detail

/// Smallest spectral gap min_{i≠j}|λᵢ − λⱼ|, the tEB constant of (Ax, x) on
/// the unit sphere.
inline double sphere_quadratic_mu(const Matrix& a, double eig_tol = 1e-8) {
  const auto eig = detail::distinct_spectrum(a, eig_tol);
  const Vector& ev = eig.eigenvalues();
  double gap = std::numeric_limits<double>::infinity();
  for (Index i = 1; i < ev.size(); ++i) gap = std::min(gap, ev(i) - ev(i - 1));
  return gap;
}

/// The 2n stationary points ±vᵢ of (Ax, x) on the unit sphere.
inline StationarySet stationary_points_sphere_quadratic(const Matrix& a,
                                                        double eig_tol = 1e-8) {
  const auto eig = detail::distinct_spectrum(a, eig_tol);
  const Problem prob = sphere_quadratic(a);
  StationarySet omega;
  omega.complete = true;
  for (Index i = 0; i < a.rows(); ++i) {
    for (double sign : {1.0, -1.0}) {
      const Vector x = sign * eig.eigenvectors().col(i);
      Vector lam(1);
      lam(0) = -eig.eigenvalues()(i);
      omega.points.push_back(x);
      omega.multipliers.push_back(lam);
      omega.sigma_values.push_back(min_singular_value(
          eval_F_prime(prob.objective, prob.constraint, {x, lam})));
    }
  }
  return omega;
}

inline double distance_to_set(const Vector& x, const StationarySet& omega) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : omega.points) best = std::min(best, (x - p).norm());
  return best;
}

inline std::size_t nearest_index(const Vector& x, const StationarySet& omega) {
  std::size_t best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < omega.points.size(); ++i) {
    const double d = (x - omega.points[i]).norm();
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return best;
}

struct TebReport {
  double mu_hat = std::numeric_limits<double>::quiet_NaN();
  Vector worst_point;
  long samples_used = 0;
  long samples_excluded = 0;
  bool vacuous = false;  ///< every sample stationary: the ratio is undefined
};

/**
 * Sampled tEB constant: min over samples of ‖P_{T_x}f′(x)‖/ρ(x, Ω). Samples
 * closer than rho_floor to Ω are excluded.
 */
inline TebReport verify_teb(const ObjectiveMap& obj, const ConstraintMap& c,
                            const StationarySet& omega, const Sampler& sampler,
                            long n_samples, Rng& rng, double rho_floor = 1e-8) {
  if (!sampler) throw Error(ErrorKind::NoSampler, "tEB check needs a sampler for S");
  TebReport report;
  std::vector<Vector> xs;
  std::vector<double> residuals;
  bool all_stationary = true;
  for (long s = 0; s < n_samples; ++s) {
    Vector x = sampler(rng);
    const Vector grad = obj.eval_grad(x);
    const double res = tangent_project(c, x, grad).norm();
    if (res > detail::rounding_floor(grad.norm())) all_stationary = false;
    xs.push_back(std::move(x));
    residuals.push_back(res);
  }
  if (all_stationary) {
    report.vacuous = true;
    return report;
  }
  if (!omega.complete) {
    throw Error(ErrorKind::InvalidArgument,
                "tEB check needs a complete enumeration of stationary points");
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const double rho = distance_to_set(xs[s], omega);
    if (rho < rho_floor) {
      ++report.samples_excluded;
      continue;
    }
    ++report.samples_used;
    const double ratio = residuals[s] / rho;
    if (ratio < best) {
      best = ratio;
      report.worst_point = xs[s];
    }
  }
  if (report.samples_used > 0) report.mu_hat = best;
  return report;
}

struct GebReport {
  double nu_hat = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> nu_floor;  ///< μ/(1 + L₁γ₀ + μγ₀) when μ is exact
  double worst_gamma = 0.0;
  Vector worst_point;
  long samples_used = 0;
  bool passes = true;
};

/**
 * Sampled gEB constant: min over samples and step sizes of ‖g_γ(x)‖/ρ(x, Ω).
 * With mu_exact the result is compared against the floor
 * μ/(1 + L₁γ₀ + μγ₀), γ₀ = min{1/L₁, R/L₀}, minus geb_slack.
 */
inline GebReport verify_geb(const ObjectiveMap& obj, const ConstraintMap& c,
                            const StationarySet& omega,
                            const std::vector<double>& gamma_grid,
                            const Sampler& sampler, long n_samples, Rng& rng,
                            std::optional<double> mu_exact = std::nullopt,
                            double geb_slack = 1e-6, double rho_floor = 1e-8) {
  if (!sampler) throw Error(ErrorKind::NoSampler, "gEB check needs a sampler for S");
  if (!omega.complete) {
    throw Error(ErrorKind::InvalidArgument,
                "gEB check needs a complete enumeration of stationary points");
  }
  const double gamma0 = step_size_bounds(obj.L0, obj.L1, c.prox_radius).gamma_max;
  for (double g : gamma_grid) {
    if (!(g > 0.0 && g < gamma0)) {
      throw Error(ErrorKind::InvalidArgument,
                  "step size " + std::to_string(g) + " outside (0, gamma0)");
    }
  }
  GebReport report;
  double best = std::numeric_limits<double>::infinity();
  for (long s = 0; s < n_samples; ++s) {
    const Vector x = sampler(rng);
    const double rho = distance_to_set(x, omega);
    if (rho < rho_floor) continue;
    ++report.samples_used;
    for (double g : gamma_grid) {
      const double ratio = gradient_mapping(obj, c, x, g).norm() / rho;
      if (ratio < best) {
        best = ratio;
        report.worst_gamma = g;
        report.worst_point = x;
      }
    }
  }
  if (report.samples_used > 0) report.nu_hat = best;
  if (mu_exact) {
    const double mu = *mu_exact;
    report.nu_floor = mu / (1.0 + obj.L1 * gamma0 + mu * gamma0);
    report.passes = report.samples_used == 0 ||
                    report.nu_hat >= *report.nu_floor - geb_slack;
  }
  return report;
}

struct NondegeneracyReport {
  struct PointReport {
    double sigma_min = 0.0;
    double inverse_norm = 0.0;
    bool degenerate = false;
  };
  double sigma0 = 0.0;  ///< max ‖F′(x*, λ_{x*})⁻¹‖ over Ω
  std::vector<PointReport> points;
  bool any_degenerate = false;
};

/// Invertibility of F′(x*, λ_{x*}) at every enumerated stationary point.
inline NondegeneracyReport nondegeneracy_check(const ObjectiveMap& obj,
                                               const ConstraintMap& c,
                                               const StationarySet& omega,
                                               double eig_tol = 1e-8) {
  NondegeneracyReport report;
  for (std::size_t i = 0; i < omega.points.size(); ++i) {
    const Vector& x = omega.points[i];
    const Vector lam = i < omega.multipliers.size() ? omega.multipliers[i]
                                                    : lambda_x(obj, c, x);
    NondegeneracyReport::PointReport pr;
    pr.sigma_min = min_singular_value(eval_F_prime(obj, c, {x, lam}));
    pr.degenerate = pr.sigma_min <= eig_tol;
    pr.inverse_norm = pr.degenerate ? std::numeric_limits<double>::infinity()
                                    : 1.0 / pr.sigma_min;
    report.any_degenerate = report.any_degenerate || pr.degenerate;
    report.sigma0 = std::max(report.sigma0, pr.inverse_norm);
    report.points.push_back(pr);
  }
  return report;
}

struct InverseBoundReport {
  double radius = 0.0;     ///< β/(σ₀L_{1,Fx})
  double bound = 0.0;      ///< σ₀/(1 − β)
  double max_ratio = 0.0;  ///< max ‖F′(x,λ_x)⁻¹‖ / bound
  long samples = 0;
  long violations = 0;
};

/**
 * Samples x ∈ S with ρ(x, Ω) ≤ β/(σ₀L_{1,Fx}) and checks
 * ‖F′(x, λ_x)⁻¹‖ ≤ σ₀/(1 − β)·(1 + 1e-6).
 */
inline InverseBoundReport inverse_bound_check(const ObjectiveMap& obj,
                                              const ConstraintMap& c,
                                              const StationarySet& omega,
                                              double sigma0, double L1Fx,
                                              double beta, long n_samples,
                                              Rng& rng) {
  if (!(beta >= 0.0 && beta < 1.0) || !(sigma0 > 0.0) || !(L1Fx > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "inverse bound check needs beta in [0,1), sigma0 > 0, L1Fx > 0");
  }
  if (omega.points.empty()) {
    throw Error(ErrorKind::InvalidArgument, "no stationary points supplied");
  }
  InverseBoundReport report;
  report.radius = beta / (sigma0 * L1Fx);
  report.bound = sigma0 / (1.0 - beta);

  auto check = [&](const Vector& x) {
    const Matrix fp = eval_F_prime(obj, c, {x, lambda_x(obj, c, x)});
    const double inv = 1.0 / min_singular_value(fp);
    const double ratio = inv / report.bound;
    report.max_ratio = std::max(report.max_ratio, ratio);
    ++report.samples;
    if (ratio > 1.0 + 1e-6) ++report.violations;
  };

  if (report.radius == 0.0) {
    for (const auto& p : omega.points) check(p);
    return report;
  }

  std::uniform_int_distribution<std::size_t> pick(0, omega.points.size() - 1);
  std::uniform_real_distribution<double> unit;
  long attempts = 0;
  while (report.samples < n_samples && attempts < 50 * n_samples) {
    ++attempts;
    const Vector& anchor = omega.points[pick(rng)];
    const Vector dir = tangent_project(c, anchor, gaussian_vector(c.n, rng));
    if (dir.norm() == 0.0) continue;
    const double len = report.radius * unit(rng);
    Vector x;
    try {
      x = project(c, anchor + len * dir / dir.norm());
    } catch (const Error&) {
      continue;
    }
    if (distance_to_set(x, omega) > report.radius) continue;
    check(x);
  }
  return report;
}

struct FdEntry {
  std::string evaluator;
  double max_rel_error = 0.0;
  Vector worst_probe;
  bool passed = true;
};

struct FdReport {
  std::vector<FdEntry> entries;
  bool passed = true;
};

/// Raised by fd_consistency; carries the full report.
class DerivativeMismatch : public Error {
 public:
  DerivativeMismatch(const std::string& message, FdReport report)
      : Error(ErrorKind::DerivativeMismatch, message), report_(std::move(report)) {}
  const FdReport& report() const noexcept { return report_; }

 private:
  FdReport report_;
};

namespace detail {

/// Central-difference Jacobian of a vector map, one column per coordinate.
template <typename Fn>
Matrix central_jacobian(Fn&& fn, const Vector& x, Index rows) {
  Matrix jac(rows, x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    Vector xp = x;
    Vector xm = x;
    xp(i) += h;
    xm(i) -= h;
    jac.col(i) = (fn(xp) - fn(xm)) / (2.0 * h);
  }
  return jac;
}

inline double rel_error(const Matrix& approx, const Matrix& exact) {
  return (approx - exact).norm() / std::max(1.0, exact.norm());
}

}  // namespace detail

/**
 * Central-difference checks of f′, f″, g′, g″ᵢ and F′ at random probes.
 * Probes come from the sampler (perturbed off S by a small Gaussian) when one
 * is given, otherwise from a standard Gaussian. Never throws on mismatch.
 */
inline FdReport fd_check(const ObjectiveMap& obj, const ConstraintMap& c,
                         const Sampler& sampler, long n_probes, Rng& rng,
                         double rel_tol = 1e-5) {
  FdReport report;
  auto entry = [](const char* name) {
    FdEntry e;
    e.evaluator = name;
    return e;
  };
  FdEntry grad = entry("gradient"), hess = entry("hessian"),
          jac = entry("constraint_jacobian"), chess = entry("constraint_hessians"),
          fprime = entry("kkt_jacobian");
  auto record = [](FdEntry& e, double err, const Vector& probe) {
    if (err > e.max_rel_error || e.worst_probe.size() == 0) {
      e.max_rel_error = std::max(e.max_rel_error, err);
      e.worst_probe = probe;
    }
  };

  for (long p = 0; p < n_probes; ++p) {
    Vector x = sampler ? Vector(sampler(rng) + 0.05 * gaussian_vector(c.n, rng))
                       : gaussian_vector(c.n, rng);

    const Matrix g_fd = detail::central_jacobian(
        [&](const Vector& y) {
          Vector v(1);
          v(0) = obj.eval_f(y);
          return v;
        },
        x, 1);
    record(grad, detail::rel_error(g_fd.transpose(), obj.eval_grad(x)), x);

    const Matrix h_fd = detail::central_jacobian(
        [&](const Vector& y) { return obj.eval_grad(y); }, x, c.n);
    record(hess, detail::rel_error(h_fd, obj.eval_hess(x)), x);

    const Matrix j_fd = detail::central_jacobian(
        [&](const Vector& y) { return c.eval_g(y); }, x, c.m);
    record(jac, detail::rel_error(j_fd, c.eval_jacobian(x)), x);

    const auto hs = c.eval_hessians(x);
    for (Index i = 0; i < c.m; ++i) {
      const Matrix gi_fd = detail::central_jacobian(
          [&](const Vector& y) {
            return Vector(c.eval_jacobian(y).row(i).transpose());
          },
          x, c.n);
      record(chess, detail::rel_error(gi_fd, hs[static_cast<size_t>(i)]), x);
    }

    const KktPoint z{x, gaussian_vector(c.m, rng)};
    const Vector zs = z.stacked();
    const Matrix f_fd = detail::central_jacobian(
        [&](const Vector& s) { return eval_F(obj, c, KktPoint::split(s, c.n)); },
        zs, c.n + c.m);
    record(fprime, detail::rel_error(f_fd, eval_F_prime(obj, c, z)), zs);
  }

  for (FdEntry* e : {&grad, &hess, &jac, &chess, &fprime}) {
    e->passed = e->max_rel_error <= rel_tol;
    report.passed = report.passed && e->passed;
    report.entries.push_back(std::move(*e));
  }
  return report;
}

/// fd_check that throws DerivativeMismatch naming the first failing evaluator.
inline FdReport fd_consistency(const ObjectiveMap& obj, const ConstraintMap& c,
                               const Sampler& sampler, long n_probes, Rng& rng,
                               double rel_tol = 1e-5) {
  FdReport report = fd_check(obj, c, sampler, n_probes, rng, rel_tol);
  for (const auto& e : report.entries) {
    if (!e.passed) {
      std::string probe;
      for (Index i = 0; i < std::min<Index>(e.worst_probe.size(), 6); ++i) {
        probe += (i ? ", " : "") + std::to_string(e.worst_probe(i));
      }
      if (e.worst_probe.size() > 6) probe += ", ...";
      throw DerivativeMismatch(e.evaluator + " disagrees with central "
                                   "differences (relative error " +
                                   std::to_string(e.max_rel_error) +
                                   ") at probe [" + probe + "]",
                               std::move(report));
    }
  }
  return report;
}

}  // namespace proxopt
