#include <gtest/gtest.h>

#include <cmath>

#include "mjls/fixedpoint.hpp"
#include "mjls/generators.hpp"
#include "mjls/stability.hpp"
#include "oracles.hpp"

using namespace mjls;

namespace {

FixedPointConfig config(Method m, double tol = 1e-9, int max_iter = 1000) {
  FixedPointConfig c;
  c.method = m;
  c.tol = tol;
  c.max_iter = max_iter;
  return c;
}

Solution<double> run(const MJLSProblem<double>& P, const FixedPointConfig& c) {
  switch (c.method) {
    case Method::Jacobi: return solve_jacobi(P, c);
    case Method::GaussSeidel: return solve_gauss_seidel(P, c);
    case Method::KrylovGS: return solve_krylov_gs(P, c);
    case Method::KrylovJacobi: return solve_krylov_jacobi(P, c);
    default: throw ConfigError("not a fixed-point method");
  }
}

const Method kMethods[] = {Method::Jacobi, Method::GaussSeidel, Method::KrylovGS, Method::KrylovJacobi};

/// Small MS-stable instance with rho(T_J) in [0.9 target, target].
MJLSProblem<double> scaled_instance(Rng& rng, Index n, Index N, double target) {
  return scale_coupling(oracle::random_small_problem(rng, n, N), target).problem;
}

}  // namespace

TEST(Bicgstab, IdentityOperatorConvergesOnTheFirstHalfStep) {
  Rng rng(41);
  const auto b = oracle::random_tuple(rng, 3, 2);
  const auto sol = bicgstab([](const SymTuple<double>& X) { return X; }, b, 1e-12, 10);
  EXPECT_TRUE(sol.report.converged);
  EXPECT_EQ(sol.report.iterations, 0.5);
  EXPECT_LT(norm(sol.X - b), 1e-15 * norm(b));
}

TEST(Bicgstab, ZeroRightHandSide) {
  const SymTuple<double> b(2, 2);
  const auto sol = bicgstab([](const SymTuple<double>& X) { return 2.0 * X; }, b, 1e-9, 10);
  EXPECT_TRUE(sol.report.converged);
  EXPECT_EQ(norm(sol.X), 0.0);
}

TEST(Bicgstab, DenseSpdModeMixing) {
  // op(X)_i = sum_j K_ij X_j with a 50 x 50 SPD K.
  Rng rng(42);
  const MatrixXd W = rng.normal_matrix(50, 50);
  const MatrixXd K = W * W.transpose() / 50.0 + MatrixXd::Identity(50, 50);
  auto op = [&K](const SymTuple<double>& X) {
    SymTuple<double> Z(X.n(), X.modes());
    Z.stacked() = X.stacked() * K.transpose();
    return Z;
  };
  const auto b = oracle::random_tuple(rng, 2, 50);
  const auto sol = bicgstab(op, b, 1e-12, 200);
  ASSERT_TRUE(sol.report.converged);
  SymTuple<double> ref(2, 50);
  ref.stacked() = b.stacked() * K.transpose().inverse();
  EXPECT_LT(norm(sol.X - ref), 1e-9 * norm(ref));
  EXPECT_LT(sol.report.iterations, 100);
}

TEST(Bicgstab, IterationCapReturnsUnconverged) {
  Rng rng(43);
  const MatrixXd W = rng.normal_matrix(30, 30);
  const MatrixXd K = W * W.transpose() + 1e-3 * MatrixXd::Identity(30, 30);
  auto op = [&K](const SymTuple<double>& X) {
    SymTuple<double> Z(X.n(), X.modes());
    Z.stacked() = X.stacked() * K.transpose();
    return Z;
  };
  const auto sol = bicgstab(op, oracle::random_tuple(rng, 2, 30), 1e-14, 2);
  EXPECT_FALSE(sol.report.converged);
  EXPECT_LE(sol.report.iterations, 2.0);
}

TEST(Jacobi, OneSweepWithoutCoupling) {
  Rng rng(44);
  const auto P0 = oracle::random_small_problem(rng, 4, 3);
  MatrixXd G = MatrixXd::Zero(3, 3);
  G.diagonal() = P0.gamma().diagonal();
  const MJLSProblem<double> P(P0.A(), P0.Y(), CouplingMatrix<double>(G));
  const auto sol = solve_jacobi(P, config(Method::Jacobi));
  EXPECT_TRUE(sol.report.converged);
  EXPECT_EQ(sol.report.iterations, 1);
}

TEST(GaussSeidel, OneSweepForLowerTriangularCoupling) {
  Rng rng(45);
  const auto P0 = oracle::random_small_problem(rng, 3, 4);
  MatrixXd G = P0.gamma().matrix();
  for (Index i = 0; i < 4; ++i)
    for (Index j = i + 1; j < 4; ++j) G(i, j) = 0;
  const MJLSProblem<double> P(P0.A(), P0.Y(), CouplingMatrix<double>(G));
  const auto gs = solve_gauss_seidel(P, config(Method::GaussSeidel));
  EXPECT_TRUE(gs.report.converged);
  EXPECT_EQ(gs.report.iterations, 1);
  const auto kgs = solve_krylov_gs(P, config(Method::KrylovGS));
  EXPECT_TRUE(kgs.report.converged);
  EXPECT_EQ(kgs.report.iterations, 0.5);  // T_GS = 0: the system is the identity
}

TEST(FixedPoint, KnownExampleAllMethods) {
  const auto ke = known_example();
  for (Method m : kMethods) {
    const auto sol = run(ke.problem, config(m, 1e-11));
    EXPECT_TRUE(sol.report.converged) << to_string(m);
    EXPECT_LE(error_norm(sol.X, ke.solution), 1e-8) << to_string(m);
    EXPECT_EQ(sol.report.method, m);
    EXPECT_DOUBLE_EQ(sol.report.residual, residual_norm(ke.problem, sol.X));
  }
}

TEST(FixedPoint, MethodsAgreeWithDirectSolve) {
  Rng rng(46);
  for (int t = 0; t < 50; ++t) {
    const Index n = 1 + t % 4, N = 1 + (t / 4) % 4;
    const auto P = N > 1 ? scaled_instance(rng, n, N, 0.8) : oracle::random_small_problem(rng, n, N);
    const auto ref = solve_direct(P);
    for (Method m : kMethods) {
      const auto sol = run(P, config(m, 1e-11, 5000));
      ASSERT_TRUE(sol.report.converged) << t << " " << to_string(m);
      EXPECT_LT(norm(sol.X - ref), 1e-7 * norm(ref)) << t << " " << to_string(m);
    }
  }
}

TEST(Jacobi, ErrorContractsAtTheSpectralRadius) {
  Rng rng(47);
  for (int t = 0; t < 5; ++t) {
    const auto P = scaled_instance(rng, 3, 3, 0.6);
    const double rho = oracle::rho_TJ(P);
    const auto ref = solve_direct(P);
    std::vector<double> err;
    auto observe = [&](int, const SymTuple<double>& X) { err.push_back(norm(X - ref) / norm(ref)); };
    solve_jacobi(P, config(Method::Jacobi, 1e-14, 60), IterateObserver<double>(observe));
    // asymptotic rate over the range well above rounding
    std::size_t last = 0;
    while (last + 1 < err.size() && err[last + 1] > 1e-11) ++last;
    ASSERT_GT(last, 15u);
    const double rate = std::pow(err[last] / err[10], 1.0 / static_cast<double>(last - 10));
    EXPECT_LE(rate, rho + 0.05) << t;
  }
}

TEST(FixedPoint, Deterministic) {
  Rng rng(48);
  const auto P = scaled_instance(rng, 4, 3, 0.7);
  for (Method m : kMethods) {
    const auto a = run(P, config(m)), b = run(P, config(m));
    EXPECT_EQ(a.X.vec(), b.X.vec()) << to_string(m);
    EXPECT_EQ(a.report.iterations, b.report.iterations);
  }
}

TEST(FixedPoint, SweepsStopOnTheOriginalResidual) {
  Rng rng(49);
  const auto P = scaled_instance(rng, 4, 4, 0.7);
  for (Method m : {Method::Jacobi, Method::GaussSeidel}) {
    const auto sol = run(P, config(m, 1e-8));
    ASSERT_TRUE(sol.report.converged);
    EXPECT_LE(sol.report.residual, 1e-8 * std::max(1.0, norm(P.Y())));
  }
}

TEST(FixedPoint, ResidualTargetTightensKrylovStop) {
  const auto ke = known_example();
  auto cfg = config(Method::KrylovGS);
  cfg.residual_target = 1e-10;
  const auto sol = solve_krylov_gs(ke.problem, cfg);
  EXPECT_TRUE(sol.report.converged);
  EXPECT_LE(sol.report.residual, 1e-10);
  EXPECT_LE(sol.report.iterations, 5);

  auto bad = cfg;
  bad.residual_target = 0.0;
  EXPECT_THROW(solve_krylov_gs(ke.problem, bad), ConfigError);
  EXPECT_THROW(solve_jacobi(ke.problem, config(Method::Jacobi, 0.0)), ConfigError);
  EXPECT_THROW(solve_jacobi(ke.problem, config(Method::Jacobi, 1e-9, 0)), ConfigError);
}

TEST(FixedPoint, IterationCapReported) {
  Rng rng(50);
  const auto P = scaled_instance(rng, 3, 3, 0.9);
  const auto sol = solve_jacobi(P, config(Method::Jacobi, 1e-12, 2));
  EXPECT_FALSE(sol.report.converged);
  EXPECT_EQ(sol.report.iterations, 2);
}

TEST(FixedPoint, NonsymmetricModerateInstance) {
  const auto P = random_stable_problem(8, 10, 3, 0.5);
  const auto ref = solve_direct(P);
  for (Method m : kMethods) {
    const auto sol = run(P, config(m, 1e-11));
    ASSERT_TRUE(sol.report.converged) << to_string(m);
    EXPECT_LT(norm(sol.X - ref), 1e-7 * norm(ref)) << to_string(m);
  }
}
