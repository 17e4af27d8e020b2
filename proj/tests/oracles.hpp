#pragma once

// Reference computations used only by the tests. Each one avoids the code
// path it checks: projectors from a QR null-space basis, nearest points by
// search, derivatives by differences.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace oracles {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// N·Nᵀ with N an orthonormal basis of null(J), read off a full QR of Jᵀ.
inline Matrix nullspace_projector(const Matrix& jac) {
  const Eigen::Index n = jac.cols();
  const Eigen::Index m = jac.rows();
  Eigen::HouseholderQR<Matrix> qr(jac.transpose());
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix basis = q.rightCols(n - m);
  return basis * basis.transpose();
}

/// Orthonormal factor of a QR decomposition with positive diagonal in R.
inline Matrix qr_orth(const Matrix& x) {
  Eigen::HouseholderQR<Matrix> qr(x);
  Matrix q = qr.householderQ() * Matrix::Identity(x.rows(), x.cols());
  const Matrix r = qr.matrixQR().topRows(x.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Random local search over frames near `start`, moving by QR retraction
/// whenever the distance to x decreases.
template <typename Rng>
Matrix stiefel_local_search(const Matrix& x, const Matrix& start, Rng& rng,
                            int iters = 400) {
  std::normal_distribution<double> normal;
  Matrix best = start;
  double best_d = (x - best).norm();
  double scale = 0.1;
  for (int it = 0; it < iters; ++it) {
    Matrix g(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    const Matrix cand = qr_orth(best + scale * g);
    const double d = (x - cand).norm();
    if (d < best_d) {
      best = cand;
      best_d = d;
    } else if (it % 50 == 49) {
      scale *= 0.5;
    }
  }
  return best;
}

/// Nearest point of the ellipse (a cos t, b sin t) by a parameter grid
/// followed by golden-section refinement.
inline Vector ellipse_nearest(const Vector& x, double a, double b) {
  auto dist2 = [&](double t) {
    const double dx = a * std::cos(t) - x(0);
    const double dy = b * std::sin(t) - x(1);
    return dx * dx + dy * dy;
  };
  const int grid = 20000;
  double best_t = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double t = 2.0 * M_PI * i / grid;
    if (dist2(t) < best) {
      best = dist2(t);
      best_t = t;
    }
  }
  double lo = best_t - 2.0 * M_PI / grid;
  double hi = best_t + 2.0 * M_PI / grid;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = hi - phi * (hi - lo);
    const double m2 = lo + phi * (hi - lo);
    if (dist2(m1) < dist2(m2)) hi = m2; else lo = m1;
  }
  // Golden section stalls near sqrt(eps); polish on d/dt dist2 = 0.
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {
    const double c = std::cos(t), s = std::sin(t);
    const double ex = a * c - x(0), ey = b * s - x(1);
    const double d1 = -ex * a * s + ey * b * c;
    const double d2 = a * a * s * s - ex * a * c + b * b * c * c - ey * b * s;
    if (d2 <= 0.0) break;
    t -= d1 / d2;
  }
  Vector p(2);
  p << a * std::cos(t), b * std::sin(t);
  return p;
}

/// Central-difference Jacobian of a vector field.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& x,
                          double h = 1e-6) {
  const Vector f0 = fn(x);
  Matrix jac(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    jac.col(i) = (fn(xp) - fn(xm)) / (2.0 * h);
  }
  return jac;
}

/// Smallest singular value via the eigenvalues of AᵀA.
inline double sigma_min_gram(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a.transpose() * a, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff()));
}

/// Minimizer of (1 + γL)²/(γ(1 − γL)) on a fine grid over (0, 1/L).
inline double n1_factor_argmin(double L1, int grid = 200000) {
  double best_g = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i < grid; ++i) {
    const double g = static_cast<double>(i) / (grid * L1);
    const double t = g * L1;
    const double v = (1.0 + t) * (1.0 + t) / (g * (1.0 - t));
    if (v < best) {
      best = v;
      best_g = g;
    }
  }
  return best_g;
}

}  // namespace oracles
