#pragma once

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "proxopt/errors.hpp"
#include "proxopt/kkt.hpp"
#include "proxopt/manifold.hpp"
#include "proxopt/trace.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

/**
 * Factorization of F′(z₀), computed once and reused by every modified Newton
 * step. Immutable after construction, so one instance may serve concurrent
 * what-if runs.
 */
class FrozenKkt {
 public:
  static FrozenKkt freeze(const ObjectiveMap& obj, const ConstraintMap& c,
                          const KktPoint& z0, double cond_tol = 1e12) {
    FrozenKkt frozen;
    frozen.anchor_ = z0;
    frozen.svd_.compute(eval_F_prime(obj, c, z0),
                        Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = frozen.svd_.singularValues();
    const double hi = s(0);
    const double lo = s(s.size() - 1);
    if (!(lo > 0.0) || hi / lo > cond_tol) {
      throw Error(ErrorKind::SingularJacobian,
                  "F'(z0) is numerically singular (sigma_min = " +
                      std::to_string(lo) + ", sigma_max = " +
                      std::to_string(hi) + ")");
    }
    frozen.sigma_min_ = lo;
    frozen.sigma_max_ = hi;
    return frozen;
  }

  /// Solves F′(z₀) d = rhs.
  Vector solve(const Vector& rhs) const { return svd_.solve(rhs); }

  const KktPoint& anchor() const { return anchor_; }
  double inverse_norm() const { return 1.0 / sigma_min_; }
  double condition() const { return sigma_max_ / sigma_min_; }

 private:
  FrozenKkt() = default;

  KktPoint anchor_;
  Eigen::JacobiSVD<Matrix> svd_;
  double sigma_min_ = 0.0;
  double sigma_max_ = 0.0;
};

/**
 * Kantorovich-type certificate for the modified Newton method started at z₀:
 *   K = ‖F′(z₀)⁻¹F(z₀)‖,  h = L_{1,F}·K·‖F′(z₀)⁻¹‖,
 *   t₀ = smaller root of ht² − t + 1 = 0,  r = K·t₀.
 * Certified iff h < 1/4 − margin. For h > 1/4 there is no real root and t₀,
 * r are +inf.
 */
struct BasinCertificate {
  double K = 0.0;
  double inv_norm = 0.0;
  double h = 0.0;
  double t0 = 1.0;
  double r = 0.0;
  bool certified = false;
};

inline BasinCertificate make_certificate(double K, double inv_norm, double L1F,
                                         double basin_margin = 0.0) {
  BasinCertificate cert;
  cert.K = K;
  cert.inv_norm = inv_norm;
  cert.h = L1F * K * inv_norm;
  if (cert.h == 0.0) {
    cert.t0 = 1.0;
  } else if (cert.h <= 0.25) {
    cert.t0 = (1.0 - std::sqrt(std::max(0.0, 1.0 - 4.0 * cert.h))) / (2.0 * cert.h);
  } else {
    cert.t0 = std::numeric_limits<double>::infinity();
  }
  cert.r = cert.h <= 0.25 ? K * cert.t0 : std::numeric_limits<double>::infinity();
  cert.certified = cert.h < 0.25 - basin_margin;
  return cert;
}

inline BasinCertificate basin_check(const FrozenKkt& frozen,
                                    const ObjectiveMap& obj,
                                    const ConstraintMap& c, double L1F,
                                    double basin_margin = 0.0) {
  const Vector step = frozen.solve(eval_F(obj, c, frozen.anchor()));
  return make_certificate(step.norm(), frozen.inverse_norm(), L1F, basin_margin);
}

inline BasinCertificate basin_check(const ObjectiveMap& obj,
                                    const ConstraintMap& c, const KktPoint& z0,
                                    double L1F, double basin_margin = 0.0,
                                    double cond_tol = 1e12) {
  return basin_check(FrozenKkt::freeze(obj, c, z0, cond_tol), obj, c, L1F,
                     basin_margin);
}

/// z − F′(z₀)⁻¹F(z); the x-part may leave S.
inline KktPoint modified_newton_step(const FrozenKkt& frozen,
                                     const ObjectiveMap& obj,
                                     const ConstraintMap& c, const KktPoint& z) {
  const Vector next = z.stacked() - frozen.solve(eval_F(obj, c, z));
  return KktPoint::split(next, c.n);
}

/**
 * Number of modified Newton steps after which the iterate is within ε of the
 * stationary set: ⌈log₂(Cσ₀/(ε(1−β)))⌉ + 1, clamped to 1 when the log
 * argument does not exceed 1.
 */
inline std::int64_t n2_bound(double C, double sigma0, double beta, double eps) {
  if (!(beta > 0.0 && beta < 1.0) || !(C > 0.0) || !(sigma0 > 0.0) ||
      !(eps > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "n2_bound needs 0 < beta < 1 and positive C, sigma0, eps");
  }
  const double arg = C * sigma0 / (eps * (1.0 - beta));
  if (arg <= 1.0) return 1;
  return static_cast<std::int64_t>(std::ceil(std::log2(arg))) + 1;
}

struct NewtonOptions {
  long max_steps = 200;
  double rate_slack = 0.1;
  ManifoldTolerances tol{};
};

struct NewtonResult {
  KktPoint z;            ///< last iterate [x̂_k, λ_k]
  Vector x_feasible;     ///< P_S(x̂_k), where the residual is measured
  double residual = 0.0; ///< ‖P_{T_y}f′(y)‖ at y = P_S(x̂_k)
  long steps = 0;
  double K = 0.0;        ///< ‖F′(z₀)⁻¹F(z₀)‖
  double observed_rate = 0.0;
  bool rate_ok = true;
  std::vector<Vector> iterates;  ///< x̂_0, x̂_1, …
  IterationTrace trace;
};

namespace detail {

/// Stationarity residual measured at the projection of a possibly
/// infeasible point; +inf when the point cannot be projected.
inline double reprojected_residual(const ObjectiveMap& obj,
                                   const ConstraintMap& c, const Vector& x,
                                   const ManifoldTolerances& tol, Vector& y) {
  try {
    const TubeStatus tube = tube_membership(c, x, tol);
    if (tube.region != TubeRegion::inside) {
      return std::numeric_limits<double>::infinity();
    }
    y = project(c, x, tol);
    return stationarity_residual(obj, c, y, tol);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace detail

/**
 * Modified Newton iteration z_{k+1} = z_k − F′(z₀)⁻¹F(z_k) until the
 * reprojected stationarity residual drops to eps. Uses a single
 * factorization of F′(z₀). Throws DivergenceDetected when ‖F(z_k)‖ grows on
 * two consecutive steps and MaxStepsExceeded when the budget runs out.
 */
inline NewtonResult run_newton(const FrozenKkt& frozen, const ObjectiveMap& obj,
                               const ConstraintMap& c, double eps,
                               const NewtonOptions& opts = {},
                               long k_offset = 0) {
  NewtonResult result;
  result.z = frozen.anchor();

  Vector kkt = eval_F(obj, c, result.z);
  const double kkt0 = kkt.norm();
  const double noise = 1e-13 * (1.0 + kkt0);
  result.K = frozen.solve(kkt).norm();

  auto log_row = [&](double step_len, double residual, double kkt_norm) {
    TraceRow row;
    row.k = k_offset + result.steps;
    row.phase = Phase::newton;
    row.f = obj.eval_f(result.z.x);
    row.residual = residual;
    row.step_len = step_len;
    row.kkt_norm = kkt_norm;
    row.x = result.z.x;
    result.trace.push_back(std::move(row));
    result.iterates.push_back(result.z.x);
  };

  Vector y = result.z.x;
  result.residual =
      detail::reprojected_residual(obj, c, result.z.x, opts.tol, y);
  result.x_feasible = y;
  log_row(0.0, result.residual, kkt0);

  double kkt_prev = kkt0;
  int growth = 0;
  double last_above_noise = kkt0;
  long last_above_noise_k = 0;
  while (!(result.residual <= eps)) {
    if (result.steps >= opts.max_steps) {
      throw MaxStepsExceeded("Newton phase did not reach eps within " +
                                 std::to_string(opts.max_steps) + " steps",
                             std::move(result.trace));
    }
    const Vector x_prev = result.z.x;
    result.z = KktPoint::split(result.z.stacked() - frozen.solve(kkt), c.n);
    ++result.steps;
    kkt = eval_F(obj, c, result.z);
    const double kkt_norm = kkt.norm();
    if (!std::isfinite(kkt_norm)) {
      throw Error(ErrorKind::DivergenceDetected, "KKT residual is not finite");
    }

    y = result.z.x;
    result.residual =
        detail::reprojected_residual(obj, c, result.z.x, opts.tol, y);
    result.x_feasible = y;
    log_row((result.z.x - x_prev).norm(), result.residual, kkt_norm);

    if (kkt_norm > noise) {
      last_above_noise = kkt_norm;
      last_above_noise_k = result.steps;
    }
    if (kkt_norm > kkt_prev && kkt_norm > noise) {
      if (++growth >= 2) {
        throw Error(ErrorKind::DivergenceDetected,
                    "||F(z_k)|| grew on two consecutive Newton steps");
      }
    } else {
      growth = 0;
    }
    kkt_prev = kkt_norm;
  }

  if (last_above_noise_k > 0 && kkt0 > 0.0) {
    result.observed_rate = std::pow(last_above_noise / kkt0,
                                    1.0 / static_cast<double>(last_above_noise_k));
    result.rate_ok = result.observed_rate <= 0.5 + opts.rate_slack;
  }
  return result;
}

inline NewtonResult run_newton(const ObjectiveMap& obj, const ConstraintMap& c,
                               const KktPoint& z0, double eps, long max_steps,
                               NewtonOptions opts = {}) {
  opts.max_steps = max_steps;
  return run_newton(FrozenKkt::freeze(obj, c, z0, opts.tol.cond_tol), obj, c,
                    eps, opts);
}

/**
 * Sampled Lipschitz constant of F′ on the ball B_radius(z₀): the largest
 * ‖F′(z) − F′(z′)‖₂/‖z − z′‖ over n_pairs random pairs, inflated by 1.5.
 */
inline double estimate_L1F(const ObjectiveMap& obj, const ConstraintMap& c,
                           const KktPoint& z0, double radius, int n_pairs,
                           Rng& rng) {
  const Index dim = c.n + c.m;
  const Vector center = z0.stacked();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  auto draw = [&] {
    Vector u(dim);
    for (Index i = 0; i < dim; ++i) u(i) = normal(rng);
    const double scale =
        radius * std::pow(unit(rng), 1.0 / static_cast<double>(dim));
    return Vector(center + scale * u / u.norm());
  };
  double best = 0.0;
  for (int p = 0; p < n_pairs; ++p) {
    const Vector a = draw();
    const Vector b = draw();
    const double dz = (a - b).norm();
    if (dz <= 0.0) continue;
    const Matrix diff = eval_F_prime(obj, c, KktPoint::split(a, c.n)) -
                        eval_F_prime(obj, c, KktPoint::split(b, c.n));
    Eigen::JacobiSVD<Matrix> svd(diff);
    best = std::max(best, svd.singularValues()(0) / dz);
  }
  return 1.5 * best;
}

}  // namespace proxopt
