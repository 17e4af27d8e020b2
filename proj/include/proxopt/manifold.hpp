#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "proxopt/errors.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

/// Numerical tolerances shared by the projection and tangent-space routines.
struct ManifoldTolerances {
  double proj_tol = 1e-8;   ///< singular-value floor for unique projections
  double feas_tol = 1e-10;  ///< ‖g(x)‖ accepted as feasible
  double ortho_tol = 1e-8;  ///< tangential residual of a projection
  int max_proj_iters = 50;
  double cond_tol = 1e12;  ///< condition number limit for g′g′ᵀ
  double tube_margin = 1e-8;
};

/**
 * The constraint g : ℝⁿ → ℝᵐ describing S = {x : g(x) = 0}.
 *
 * Evaluators must be reentrant; a ConstraintMap is shared read-only between
 * solver runs. exact_projector and exact_distance are optional and, when
 * present, replace the iterative level-set projection.
 */
struct ConstraintMap {
  Index n = 0;
  Index m = 0;
  std::function<Vector(const Vector&)> eval_g;
  std::function<Matrix(const Vector&)> eval_jacobian;
  std::function<std::vector<Matrix>(const Vector&)> eval_hessians;
  double prox_radius = 0.0;
  std::function<Vector(const Vector&)> exact_projector;
  std::function<double(const Vector&)> exact_distance;
  std::string name = "levelset";
};

struct TangentProjector {
  Vector at_point;
  Matrix matrix;
};

enum class TubeRegion { inside, boundary, outside };

struct TubeStatus {
  TubeRegion region = TubeRegion::outside;
  double distance = std::numeric_limits<double>::infinity();
  bool estimated = false;
};

namespace detail {

/// Cholesky factor of the Gram matrix g′g′ᵀ with a conditioning guard.
inline Eigen::LLT<Matrix> factor_gram(const Matrix& jac, double cond_tol) {
  const Matrix gram = jac * jac.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > cond_tol) {
    throw Error(ErrorKind::RankDeficient,
                "constraint Jacobian Gram matrix is numerically singular "
                "(eigenvalues " +
                    std::to_string(lo) + " .. " + std::to_string(hi) + ")");
  }
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::RankDeficient, "Cholesky of g'g'^T failed");
  }
  return llt;
}

inline void check_dims(const ConstraintMap& c, const Vector& x) {
  if (x.size() != c.n) {
    throw Error(ErrorKind::InvalidArgument,
                "point has dimension " + std::to_string(x.size()) +
                    ", constraint expects " + std::to_string(c.n));
  }
}

}  // namespace detail

/// Returns P_{T_x} v = v − g′ᵀ(g′g′ᵀ)⁻¹g′v.
inline Vector tangent_project(const ConstraintMap& c, const Vector& x,
                              const Vector& v,
                              const ManifoldTolerances& tol = {}) {
  detail::check_dims(c, x);
  const Matrix jac = c.eval_jacobian(x);
  const auto llt = detail::factor_gram(jac, tol.cond_tol);
  return v - jac.transpose() * llt.solve(jac * v);
}

inline TangentProjector tangent_projector(const ConstraintMap& c,
                                          const Vector& x,
                                          const ManifoldTolerances& tol = {}) {
  detail::check_dims(c, x);
  const Matrix jac = c.eval_jacobian(x);
  const auto llt = detail::factor_gram(jac, tol.cond_tol);
  Matrix p = Matrix::Identity(c.n, c.n) - jac.transpose() * llt.solve(jac);
  return {x, 0.5 * (p + p.transpose())};
}

inline Vector project_sphere(const Vector& x, double radius,
                             double proj_tol = ManifoldTolerances{}.proj_tol) {
  const double norm = x.norm();
  if (norm <= proj_tol) {
    throw Error(ErrorKind::AmbiguousProjection,
                "every point of the sphere is nearest to the origin");
  }
  return (radius / norm) * x;
}

/**
 * Nearest n×k matrix with orthonormal columns in the Frobenius metric,
 * U·I_{n,k}·Vᵀ from the SVD of X. Unique iff every singular value of X is
 * positive; the tube of radius one around the Stiefel manifold contains only
 * such matrices.
 */
inline Matrix project_stiefel(const Matrix& x,
                              double proj_tol = ManifoldTolerances{}.proj_tol) {
  if (x.cols() > x.rows() || x.cols() == 0) {
    throw Error(ErrorKind::InvalidArgument,
                "Stiefel projection needs an n x k matrix with 0 < k <= n");
  }
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().minCoeff() <= proj_tol) {
    throw Error(ErrorKind::AmbiguousProjection,
                "matrix has a vanishing singular value; projection onto the "
                "Stiefel manifold is not unique");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

/// Frobenius distance from X to the Stiefel manifold: ‖σ(X) − 1‖.
inline double stiefel_distance(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> svd(x);
  return (svd.singularValues().array() - 1.0).matrix().norm();
}

/// Column-major flattening used to run matrix problems through ℝ^{nk}.
inline Vector flatten(const Matrix& x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

inline Matrix unflatten(const Vector& v, Index rows, Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/**
 * Nearest point of a generic level set by Newton iteration on the
 * optimality system of min ‖y − x‖² s.t. g(y) = 0:
 *
 *   y − x + g′(y)ᵀν = 0,   g(y) = 0,
 *
 * seeded at y = x, ν = 0, with backtracking on the residual norm.
 */
inline Vector project_levelset(const ConstraintMap& c, const Vector& x,
                               const ManifoldTolerances& tol = {}) {
  detail::check_dims(c, x);
  const Index n = c.n;
  const Index m = c.m;

  Vector y = x;
  Vector nu = Vector::Zero(m);

  auto residual = [&](const Vector& yy, const Vector& nn) {
    Vector r(n + m);
    r.head(n) = yy - x + c.eval_jacobian(yy).transpose() * nn;
    r.tail(m) = c.eval_g(yy);
    return r;
  };

  const double scale = 1.0 + x.norm();
  Vector r = residual(y, nu);
  for (int it = 0; it < tol.max_proj_iters; ++it) {
    if (r.norm() <= 1e-14 * scale) break;

    const Matrix jac = c.eval_jacobian(y);
    const auto hessians = c.eval_hessians(y);
    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n).setIdentity();
    for (Index i = 0; i < m; ++i) {
      kkt.topLeftCorner(n, n) += nu(i) * hessians[static_cast<size_t>(i)];
    }
    kkt.topRightCorner(n, m) = jac.transpose();
    kkt.bottomLeftCorner(m, n) = jac;

    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) {
      throw Error(ErrorKind::RankDeficient,
                  "nearest-point system is singular during level-set "
                  "projection");
    }
    const Vector step = lu.solve(-r);

    double alpha = 1.0;
    Vector y_new;
    Vector nu_new;
    Vector r_new;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      y_new = y + alpha * step.head(n);
      nu_new = nu + alpha * step.tail(m);
      r_new = residual(y_new, nu_new);
      if (r_new.norm() < r.norm()) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // stalled at rounding level
    y = std::move(y_new);
    nu = std::move(nu_new);
    r = std::move(r_new);
  }

  const bool feasible = c.eval_g(y).norm() <= tol.feas_tol;
  bool orthogonal = false;
  if (feasible) {
    orthogonal = tangent_project(c, y, x - y, tol).norm() <= tol.ortho_tol;
  }
  if (!feasible || !orthogonal) {
    throw Error(ErrorKind::NoConvergence,
                "level-set projection did not converge within " +
                    std::to_string(tol.max_proj_iters) + " iterations");
  }
  return y;
}

/// Metric projection onto S: the exact projector when one exists, else the
/// iterative level-set projection.
inline Vector project(const ConstraintMap& c, const Vector& x,
                      const ManifoldTolerances& tol = {}) {
  if (c.exact_projector) return c.exact_projector(x);
  return project_levelset(c, x, tol);
}

/**
 * Classifies x against the tube U_S(R). Distances are exact when the
 * constraint carries an exact distance, otherwise estimated through the
 * level-set projection.
 */
inline TubeStatus tube_membership(const ConstraintMap& c, const Vector& x,
                                  const ManifoldTolerances& tol = {}) {
  detail::check_dims(c, x);
  TubeStatus status;
  if (c.exact_distance) {
    status.distance = c.exact_distance(x);
    status.estimated = false;
  } else {
    status.estimated = true;
    try {
      status.distance = (x - project_levelset(c, x, tol)).norm();
    } catch (const Error&) {
      status.region = TubeRegion::outside;
      return status;
    }
  }
  const double radius = c.prox_radius;
  if (status.distance < radius - tol.tube_margin) {
    status.region = TubeRegion::inside;
  } else if (status.distance <= radius + tol.tube_margin) {
    status.region = TubeRegion::boundary;
  } else {
    status.region = TubeRegion::outside;
  }
  return status;
}

/// Sphere ‖x‖² − r² = 0 in ℝⁿ; proximally smooth with constant r.
inline ConstraintMap sphere_constraint(Index n, double radius = 1.0) {
  ConstraintMap c;
  c.n = n;
  c.m = 1;
  c.name = "sphere";
  c.prox_radius = radius;
  c.eval_g = [radius](const Vector& x) {
    Vector g(1);
    g(0) = x.squaredNorm() - radius * radius;
    return g;
  };
  c.eval_jacobian = [](const Vector& x) {
    Matrix j = 2.0 * x.transpose();
    return j;
  };
  c.eval_hessians = [n](const Vector&) {
    return std::vector<Matrix>{2.0 * Matrix::Identity(n, n)};
  };
  c.exact_projector = [radius](const Vector& x) {
    return project_sphere(x, radius);
  };
  c.exact_distance = [radius](const Vector& x) {
    return std::abs(x.norm() - radius);
  };
  return c;
}

/**
 * Stiefel manifold S_{n,k} on column-major vec(X) ∈ ℝ^{nk}. The constraints
 * are the upper triangle of XᵀX − I_k, ordered (i, j) with i ≤ j, giving
 * m = k(k+1)/2 independent equations.
 */
inline ConstraintMap stiefel_constraint(Index n, Index k) {
  if (k < 1 || k > n) {
    throw Error(ErrorKind::InvalidArgument, "Stiefel manifold needs 1 <= k <= n");
  }
  ConstraintMap c;
  c.n = n * k;
  c.m = k * (k + 1) / 2;
  c.name = "stiefel";
  c.prox_radius = 1.0;

  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < k; ++i) {
    for (Index j = i; j < k; ++j) pairs.emplace_back(i, j);
  }

  c.eval_g = [n, k, pairs](const Vector& v) {
    const Matrix x = unflatten(v, n, k);
    const Matrix gram = x.transpose() * x;
    Vector g(static_cast<Index>(pairs.size()));
    for (size_t p = 0; p < pairs.size(); ++p) {
      const auto [i, j] = pairs[p];
      g(static_cast<Index>(p)) = gram(i, j) - (i == j ? 1.0 : 0.0);
    }
    return g;
  };
  c.eval_jacobian = [n, k, pairs](const Vector& v) {
    const Matrix x = unflatten(v, n, k);
    Matrix jac = Matrix::Zero(static_cast<Index>(pairs.size()), n * k);
    for (size_t p = 0; p < pairs.size(); ++p) {
      const auto [i, j] = pairs[p];
      const Index row = static_cast<Index>(p);
      if (i == j) {
        jac.block(row, i * n, 1, n) = 2.0 * x.col(i).transpose();
      } else {
        jac.block(row, i * n, 1, n) = x.col(j).transpose();
        jac.block(row, j * n, 1, n) = x.col(i).transpose();
      }
    }
    return jac;
  };
  c.eval_hessians = [n, k, pairs](const Vector&) {
    std::vector<Matrix> hs;
    hs.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
      Matrix h = Matrix::Zero(n * k, n * k);
      if (i == j) {
        h.block(i * n, i * n, n, n) = 2.0 * Matrix::Identity(n, n);
      } else {
        h.block(i * n, j * n, n, n) = Matrix::Identity(n, n);
        h.block(j * n, i * n, n, n) = Matrix::Identity(n, n);
      }
      hs.push_back(std::move(h));
    }
    return hs;
  };
  c.exact_projector = [n, k](const Vector& v) {
    return flatten(project_stiefel(unflatten(v, n, k)));
  };
  c.exact_distance = [n, k](const Vector& v) {
    return stiefel_distance(unflatten(v, n, k));
  };
  return c;
}

/// Generic level set with user-supplied evaluators and no exact projector.
inline ConstraintMap levelset_constraint(
    Index n, Index m, std::function<Vector(const Vector&)> g,
    std::function<Matrix(const Vector&)> jacobian,
    std::function<std::vector<Matrix>(const Vector&)> hessians,
    double prox_radius) {
  if (m < 1 || m >= n) {
    throw Error(ErrorKind::InvalidArgument, "level set needs 1 <= m < n");
  }
  if (!(prox_radius > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "prox radius must be positive");
  }
  ConstraintMap c;
  c.n = n;
  c.m = m;
  c.name = "levelset";
  c.eval_g = std::move(g);
  c.eval_jacobian = std::move(jacobian);
  c.eval_hessians = std::move(hessians);
  c.prox_radius = prox_radius;
  return c;
}

/**
 * Prox-smoothness constant ℓ/L_g for a scalar constraint whose gradient norm
 * is at least ℓ on S and whose value is L_g-Lipschitz. Only meaningful for
 * m = 1.
 */
inline double scalar_levelset_prox_radius(double grad_lower_bound,
                                          double lipschitz) {
  if (!(grad_lower_bound > 0.0) || !(lipschitz > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "gradient bound and Lipschitz constant must be positive");
  }
  return grad_lower_bound / lipschitz;
}

}  // namespace proxopt
