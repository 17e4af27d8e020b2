#pragma once

#include <functional>
#include <string>

#include "proxopt/errors.hpp"
#include "proxopt/manifold.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

/**
 * Objective f with its gradient and Hessian. L0 bounds ‖f′‖ near S and L1 is
 * the Lipschitz constant of f′; both feed the step-size rule.
 */
struct ObjectiveMap {
  std::function<double(const Vector&)> eval_f;
  std::function<Vector(const Vector&)> eval_grad;
  std::function<Matrix(const Vector&)> eval_hess;
  double L0 = 0.0;
  double L1 = 0.0;
  Provenance L0_source = Provenance::unset;
  Provenance L1_source = Provenance::unset;
};

/// Extended variable z = [x, λ] of the Lagrangian system.
struct KktPoint {
  Vector x;
  Vector lambda;

  Vector stacked() const {
    Vector z(x.size() + lambda.size());
    z << x, lambda;
    return z;
  }

  static KktPoint split(const Vector& z, Index n) {
    return {z.head(n), z.tail(z.size() - n)};
  }
};

namespace detail {

inline void check_dims(const ConstraintMap& c, const KktPoint& z) {
  if (z.x.size() != c.n || z.lambda.size() != c.m) {
    throw Error(ErrorKind::InvalidArgument,
                "KKT point dimensions (" + std::to_string(z.x.size()) + ", " +
                    std::to_string(z.lambda.size()) +
                    ") do not match the problem (" + std::to_string(c.n) +
                    ", " + std::to_string(c.m) + ")");
  }
}

}  // namespace detail

/// Least-squares multiplier λ_x = −(g′g′ᵀ)⁻¹g′f′.
inline Vector lambda_x(const ObjectiveMap& obj, const ConstraintMap& c,
                       const Vector& x, const ManifoldTolerances& tol = {}) {
  detail::check_dims(c, x);
  const Matrix jac = c.eval_jacobian(x);
  const auto llt = detail::factor_gram(jac, tol.cond_tol);
  return -llt.solve(jac * obj.eval_grad(x));
}

/// F(z) = [f′(x) + g′(x)ᵀλ; g(x)].
inline Vector eval_F(const ObjectiveMap& obj, const ConstraintMap& c,
                     const KktPoint& z) {
  detail::check_dims(c, z);
  Vector out(c.n + c.m);
  out.head(c.n) = obj.eval_grad(z.x) + c.eval_jacobian(z.x).transpose() * z.lambda;
  out.tail(c.m) = c.eval_g(z.x);
  return out;
}

/// F′(z) = [[f″ + Σλᵢg″ᵢ, g′ᵀ], [g′, 0]], symmetrized.
inline Matrix eval_F_prime(const ObjectiveMap& obj, const ConstraintMap& c,
                           const KktPoint& z) {
  detail::check_dims(c, z);
  const Index n = c.n;
  const Index m = c.m;
  Matrix out = Matrix::Zero(n + m, n + m);
  Matrix top = obj.eval_hess(z.x);
  const auto hessians = c.eval_hessians(z.x);
  for (Index i = 0; i < m; ++i) {
    top += z.lambda(i) * hessians[static_cast<size_t>(i)];
  }
  out.topLeftCorner(n, n) = 0.5 * (top + top.transpose());
  const Matrix jac = c.eval_jacobian(z.x);
  out.topRightCorner(n, m) = jac.transpose();
  out.bottomLeftCorner(m, n) = jac;
  return out;
}

/// F_x(x) = f′ + g′ᵀλ_x = P_{T_x}f′(x).
inline Vector projected_gradient(const ObjectiveMap& obj, const ConstraintMap& c,
                                 const Vector& x,
                                 const ManifoldTolerances& tol = {}) {
  return tangent_project(c, x, obj.eval_grad(x), tol);
}

/// ‖P_{T_x}f′(x)‖, zero exactly at stationary points.
inline double stationarity_residual(const ObjectiveMap& obj,
                                    const ConstraintMap& c, const Vector& x,
                                    const ManifoldTolerances& tol = {}) {
  return projected_gradient(obj, c, x, tol).norm();
}

}  // namespace proxopt
