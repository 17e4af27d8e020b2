#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "proxopt/errors.hpp"
#include "proxopt/kkt.hpp"
#include "proxopt/manifold.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

/// Objective, constraint and a sampler for S bundled into one problem.
struct Problem {
  std::string name;
  ObjectiveMap objective;
  ConstraintMap constraint;
  Sampler sampler;
  std::optional<Matrix> quadratic;  ///< A for (Ax,x) / trace(XᵀAX) problems
  Index frame_rows = 0;             ///< n of S_{n,k} for Stiefel problems
  Index frame_cols = 0;             ///< k of S_{n,k}
};

inline Vector gaussian_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix).
inline Matrix random_orthogonal(Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Q·diag(spectrum)·Qᵀ with Q random orthogonal from the given seed.
inline Matrix symmetric_from_spectrum(const std::vector<double>& spectrum,
                                      std::uint64_t seed) {
  const Index n = static_cast<Index>(spectrum.size());
  Rng rng(seed);
  const Matrix q = random_orthogonal(n, rng);
  const Vector d = Eigen::Map<const Vector>(spectrum.data(), n);
  Matrix a = q * d.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

inline double spectral_norm(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()),
                                            Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

inline Sampler sphere_sampler(Index n, double radius = 1.0) {
  return [n, radius](Rng& rng) {
    Vector v = gaussian_vector(n, rng);
    return Vector(radius * v / v.norm());
  };
}

inline Sampler stiefel_sampler(Index n, Index k) {
  return [n, k](Rng& rng) {
    const Vector g = gaussian_vector(n * k, rng);
    return flatten(project_stiefel(unflatten(g, n, k)));
  };
}

/**
 * f(x) = (Ax, x) on the unit sphere. L₁ = 2‖A‖ and L₀ = max ‖f′‖ over the
 * sphere = 2‖A‖, both closed form.
 */
inline Problem sphere_quadratic(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 2) {
    throw Error(ErrorKind::InvalidArgument, "A must be square with n >= 2");
  }
  const Index n = a.rows();
  const Matrix sym = 0.5 * (a + a.transpose());
  Problem p;
  p.name = "sphere_quadratic";
  p.quadratic = sym;
  p.constraint = sphere_constraint(n, 1.0);
  p.sampler = sphere_sampler(n, 1.0);
  p.objective.eval_f = [sym](const Vector& x) { return x.dot(sym * x); };
  p.objective.eval_grad = [sym](const Vector& x) { return Vector(2.0 * sym * x); };
  p.objective.eval_hess = [sym](const Vector&) { return Matrix(2.0 * sym); };
  const double norm = spectral_norm(sym);
  p.objective.L0 = 2.0 * norm;
  p.objective.L1 = 2.0 * norm;
  p.objective.L0_source = Provenance::closed_form;
  p.objective.L1_source = Provenance::closed_form;
  return p;
}

/**
 * f(X) = trace(XᵀAX) on S_{n,k}, over column-major vec(X). L₁ = 2‖A‖ and
 * L₀ = max_{X∈S} ‖2AX‖_F = 2·sqrt(sum of the k largest λᵢ²).
 */
inline Problem stiefel_quadratic(const Matrix& a, Index k) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::InvalidArgument, "A must be square");
  }
  const Index n = a.rows();
  const Matrix sym = 0.5 * (a + a.transpose());
  Problem p;
  p.name = "stiefel_quadratic";
  p.quadratic = sym;
  p.frame_rows = n;
  p.frame_cols = k;
  p.constraint = stiefel_constraint(n, k);
  p.sampler = stiefel_sampler(n, k);
  p.objective.eval_f = [sym, n, k](const Vector& v) {
    const Matrix x = unflatten(v, n, k);
    return (x.transpose() * sym * x).trace();
  };
  p.objective.eval_grad = [sym, n, k](const Vector& v) {
    return flatten(2.0 * sym * unflatten(v, n, k));
  };
  p.objective.eval_hess = [sym, n, k](const Vector&) {
    Matrix h = Matrix::Zero(n * k, n * k);
    for (Index j = 0; j < k; ++j) h.block(j * n, j * n, n, n) = 2.0 * sym;
    return h;
  };
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  std::vector<double> sq;
  for (Index i = 0; i < n; ++i) sq.push_back(eig.eigenvalues()(i) * eig.eigenvalues()(i));
  std::sort(sq.begin(), sq.end(), std::greater<>());
  double top = 0.0;
  for (Index i = 0; i < k; ++i) top += sq[static_cast<size_t>(i)];
  p.objective.L0 = 2.0 * std::sqrt(top);
  p.objective.L1 = 2.0 * eig.eigenvalues().cwiseAbs().maxCoeff();
  p.objective.L0_source = Provenance::closed_form;
  p.objective.L1_source = Provenance::closed_form;
  return p;
}

}  // namespace proxopt
