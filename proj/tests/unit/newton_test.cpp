#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "proxopt/proxopt.hpp"

using namespace proxopt;

namespace {

std::vector<double> one_to(int n) {
  std::vector<double> s;
  for (int i = 1; i <= n; ++i) s.push_back(i);
  return s;
}

}  // namespace

TEST(Certificate, ZeroResidualIsCertified) {
  const auto c = make_certificate(0.0, 2.0, 3.0);
  EXPECT_EQ(c.h, 0.0);
  EXPECT_EQ(c.t0, 1.0);
  EXPECT_EQ(c.r, 0.0);
  EXPECT_TRUE(c.certified);
}

TEST(Certificate, QuarterIsBoundaryAndRejected) {
  const auto c = make_certificate(0.5, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(c.h, 0.25);
  EXPECT_DOUBLE_EQ(c.t0, 2.0);
  EXPECT_DOUBLE_EQ(c.r, 1.0);
  EXPECT_FALSE(c.certified);
}

TEST(Certificate, RootSolvesQuadratic) {
  for (double h : {1e-6, 0.01, 0.1, 0.2, 0.2499}) {
    const auto c = make_certificate(1.0, 1.0, h);
    EXPECT_NEAR(h * c.t0 * c.t0 - c.t0 + 1.0, 0.0, 1e-9);
    EXPECT_GT(c.t0, 1.0);
    EXPECT_LE(c.t0, 2.0);
    EXPECT_LE(c.r, 2.0 * c.K);
    EXPECT_TRUE(c.certified);
  }
  const auto far = make_certificate(1.0, 1.0, 0.3);
  EXPECT_FALSE(far.certified);
  EXPECT_TRUE(std::isinf(far.r));
}

TEST(Certificate, MarginTightensGate) {
  EXPECT_TRUE(make_certificate(1.0, 1.0, 0.24).certified);
  EXPECT_FALSE(make_certificate(1.0, 1.0, 0.24, 0.02).certified);
}

TEST(N2Bound, Arithmetic) {
  EXPECT_EQ(n2_bound(1e-3, 10.0, 0.5, 1e-8), 22);
  EXPECT_EQ(n2_bound(1e-3, 10.0, 0.5, 1.0), 1);
  EXPECT_THROW(n2_bound(1e-3, 10.0, 1.0, 1e-8), Error);
  EXPECT_THROW(n2_bound(1e-3, 10.0, 0.0, 1e-8), Error);
}

TEST(ModifiedNewton, ScalarModelMatchesHandIteration) {
  // F(z) = z² encoded as a one-dimensional "objective" with no constraint
  // coupling: use n = 2, m = 1 with g(x) = x₂ and f(x) = x₁³/3.
  ObjectiveMap obj;
  obj.eval_f = [](const Vector& x) { return x(0) * x(0) * x(0) / 3.0; };
  obj.eval_grad = [](const Vector& x) {
    Vector g = Vector::Zero(2);
    g(0) = x(0) * x(0);
    return g;
  };
  obj.eval_hess = [](const Vector& x) {
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = 2.0 * x(0);
    return h;
  };
  const auto c = levelset_constraint(
      2, 1,
      [](const Vector& x) {
        Vector g(1);
        g(0) = x(1);
        return g;
      },
      [](const Vector&) {
        Matrix j(1, 2);
        j << 0.0, 1.0;
        return j;
      },
      [](const Vector&) { return std::vector<Matrix>{Matrix::Zero(2, 2)}; }, 1.0);
  Vector x0(2);
  x0 << 1.0, 0.0;
  const KktPoint z0{x0, Vector::Zero(1)};
  const auto frozen = FrozenKkt::freeze(obj, c, z0);
  KktPoint z = z0;
  double hand = 1.0;
  for (int k = 0; k < 6; ++k) {
    z = modified_newton_step(frozen, obj, c, z);
    hand = hand - hand * hand / 2.0;
    EXPECT_NEAR(z.x(0), hand, 1e-15);
    EXPECT_NEAR(z.x(1), 0.0, 1e-15);
    if (k == 0) { EXPECT_EQ(z.x(0), 0.5); }
    if (k == 1) { EXPECT_EQ(z.x(0), 0.375); }
  }
}

TEST(ModifiedNewton, StationaryAnchorIsFixed) {
  const Matrix a = symmetric_from_spectrum({1, 3, 6}, 2);
  const auto p = sphere_quadratic(a);
  const auto omega = stationary_points_sphere_quadratic(a);
  const KktPoint z0{omega.points[2], omega.multipliers[2]};
  const auto frozen = FrozenKkt::freeze(p.objective, p.constraint, z0);
  const auto cert = basin_check(frozen, p.objective, p.constraint, 4.0 / std::sqrt(3.0));
  EXPECT_LT(cert.K, 1e-14);
  EXPECT_TRUE(cert.certified);
  const auto nr = run_newton(frozen, p.objective, p.constraint, 1e-10);
  EXPECT_EQ(nr.steps, 0);
}

TEST(FrozenKkt, InverseNormMatchesEigenOracle) {
  const Matrix a = symmetric_from_spectrum({1, 2, 5}, 8);
  const auto p = sphere_quadratic(a);
  Rng rng(1);
  const Vector x = p.sampler(rng);
  const KktPoint z{x, lambda_x(p.objective, p.constraint, x)};
  const auto frozen = FrozenKkt::freeze(p.objective, p.constraint, z);
  const double oracle =
      1.0 / oracles::sigma_min_gram(eval_F_prime(p.objective, p.constraint, z));
  EXPECT_NEAR(frozen.inverse_norm(), oracle, 1e-8 * oracle);
}

TEST(FrozenKkt, SingularJacobianIsReported) {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << 1.0, 1.0, 2.0;
  const auto p = sphere_quadratic(a);
  Vector lam(1);
  lam(0) = -1.0;
  try {
    FrozenKkt::freeze(p.objective, p.constraint, {Vector::Unit(3, 0), lam});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularJacobian);
  }
}

TEST(RunNewton, ConvergesFromHandoffWithinBoundAndRate) {
  const Matrix a = symmetric_from_spectrum(one_to(10), 5);
  const auto p = sphere_quadratic(a);
  Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    const Vector x0 = p.sampler(rng);
    const auto l = sphere_quadratic_ledger(a, 0.5, x0);
    GpaConfig cfg;
    cfg.gamma = 1.0 / 60.0;
    cfg.switch_C = l.C.value;
    const auto g = run_gpa(p.objective, p.constraint, x0, cfg);
    const KktPoint z0{g.x, lambda_x(p.objective, p.constraint, g.x)};
    const auto frozen = FrozenKkt::freeze(p.objective, p.constraint, z0);
    const auto cert = basin_check(frozen, p.objective, p.constraint, l.L1F.value);
    ASSERT_TRUE(cert.certified);
    const auto nr = run_newton(frozen, p.objective, p.constraint, 1e-10);
    EXPECT_LE(nr.residual, 1e-10);
    EXPECT_LE(nr.steps, n2_bound(l.C.value, l.sigma0.value, 0.5, 1e-10));
    const Vector& last = nr.iterates.back();
    for (std::size_t k = 1; k < nr.iterates.size(); ++k) {
      EXPECT_LE((nr.iterates[k] - last).norm(),
                std::pow(2.0, 1.0 - static_cast<double>(k)) * nr.K * (1.0 + 1e-6) + 1e-15);
    }
    EXPECT_TRUE(nr.rate_ok);
  }
}

TEST(RunNewton, DivergenceIsDetectedFarFromBasin) {
  const Matrix a = symmetric_from_spectrum(one_to(6), 3);
  const auto p = sphere_quadratic(a);
  Rng rng(4);
  bool saw_failure = false;
  for (int t = 0; t < 20 && !saw_failure; ++t) {
    const Vector x = p.sampler(rng);
    Vector lam(1);
    lam(0) = 30.0;  // far from any multiplier −λᵢ
    NewtonOptions opts;
    opts.max_steps = 60;
    try {
      const auto frozen = FrozenKkt::freeze(p.objective, p.constraint, {x, lam});
      run_newton(frozen, p.objective, p.constraint, 1e-10, opts);
    } catch (const Error& e) {
      saw_failure = e.kind() == ErrorKind::DivergenceDetected ||
                    e.kind() == ErrorKind::MaxStepsExceeded;
    }
  }
  EXPECT_TRUE(saw_failure);
}

TEST(EstimateL1F, AffineJacobianSphere) {
  const Matrix a = symmetric_from_spectrum({1, 2, 3}, 1);
  const auto p = sphere_quadratic(a);
  Rng rng(3);
  const Vector x = p.sampler(rng);
  const double est = estimate_L1F(p.objective, p.constraint,
                                  {x, lambda_x(p.objective, p.constraint, x)}, 1.0, 300, rng);
  // F′ varies as [[2δλI, 2δx], [2δxᵀ, 0]], whose norm per unit step is at
  // most 4/√3; the 1.5 inflation keeps the estimate above the sampled max.
  EXPECT_LE(est, 1.5 * 4.0 / std::sqrt(3.0) + 1e-12);
  EXPECT_GT(est, 1.0);
}
