#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mjls/generators.hpp"
#include "mjls/model.hpp"
#include "mjls/optimization.hpp"
#include "oracles.hpp"

using namespace mjls;

TEST(SymTuple, RejectsAsymmetricBlocksUnlessAsked) {
  MatrixXd B = MatrixXd::Identity(3, 3);
  B(0, 1) = 1e-6;
  EXPECT_THROW(SymTuple<double>::from_blocks({B}), InvariantError);
  const auto S = SymTuple<double>::from_blocks({B}, Symmetrize::Yes);
  EXPECT_DOUBLE_EQ(S.block(0)(0, 1), 5e-7);
  EXPECT_DOUBLE_EQ(S.block(0)(1, 0), 5e-7);

  // Within the 1e-9 relative band the block is accepted as is.
  MatrixXd C = MatrixXd::Identity(3, 3);
  C(0, 1) = 5e-10;
  EXPECT_NO_THROW(SymTuple<double>::from_blocks({C}));
}

TEST(SymTuple, ShapeChecks) {
  EXPECT_THROW(SymTuple<double>(0, 2), DimensionError);
  EXPECT_THROW(SymTuple<double>::from_blocks({MatrixXd::Identity(2, 2), MatrixXd::Identity(3, 3)}), DimensionError);
  EXPECT_THROW(SymTuple<double>::from_data(MatrixXd::Zero(2, 5), 2), DimensionError);
  SymTuple<double> a(2, 2), b(2, 3);
  EXPECT_THROW(a += b, DimensionError);
  EXPECT_THROW(dot(a, b), DimensionError);
}

TEST(SymTuple, StackedLayoutIsColumnMajorPerBlock) {
  MatrixXd X1(2, 2), X2(2, 2);
  X1 << 1, 2, 2, 3;
  X2 << 4, 5, 5, 6;
  const auto X = SymTuple<double>::from_blocks({X1, X2});
  const double expected[] = {1, 2, 2, 3, 4, 5, 5, 6};
  for (int k = 0; k < 8; ++k) EXPECT_EQ(X.vec()(k), expected[k]);
  EXPECT_EQ(X.stacked().rows(), 4);
  EXPECT_EQ(X.stacked().cols(), 2);
  EXPECT_EQ(X.stacked()(1, 1), 5);
}

TEST(SymTuple, InnerProductAndNorm) {
  Rng rng(1);
  const auto X = oracle::random_tuple(rng, 3, 4);
  const auto Z = oracle::random_tuple(rng, 3, 4);
  double ref = 0;
  for (Index i = 0; i < 4; ++i) ref += (X.block(i).transpose() * Z.block(i)).trace();
  EXPECT_NEAR(dot(X, Z), ref, 1e-13 * std::abs(ref) + 1e-13);
  EXPECT_NEAR(norm(X) * norm(X), dot(X, X), 1e-12 * dot(X, X));
  auto W = X;
  W.axpy(2.0, Z);
  EXPECT_LT(norm(W - (X + 2.0 * Z)), 1e-14 * norm(W));
}

TEST(CouplingMatrix, SignConstraintNamesTheEntry) {
  MatrixXd G(2, 2);
  G << -1, -0.1, 1, -1;
  try {
    CouplingMatrix<double> g(G);
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,2)"), std::string::npos) << e.what();
  }
}

TEST(CouplingMatrix, GeneralAndRateModes) {
  MatrixXd G(2, 2);
  G << 0, 0, 1, -1;
  EXPECT_THROW(CouplingMatrix<double>(G, CouplingKind::General), InvariantError);  // general needs gamma_ii < 0
  const CouplingMatrix<double> rate(G, CouplingKind::RateMatrix);
  EXPECT_EQ(rate.zero_diagonal_rows(), std::vector<Index>{0});

  MatrixXd H(2, 2);
  H << -1, 0.5, 1, -1;
  EXPECT_NO_THROW(CouplingMatrix<double>(H, CouplingKind::General));
  EXPECT_THROW(CouplingMatrix<double>(H, CouplingKind::RateMatrix), InvariantError);
  EXPECT_THROW(CouplingMatrix<double>(MatrixXd::Zero(2, 3)), DimensionError);
  EXPECT_EQ(CouplingMatrix<double>(H).off_diagonal()(0, 0), 0.0);
  EXPECT_EQ(CouplingMatrix<double>(H).off_diagonal()(0, 1), 0.5);
}

TEST(MJLSProblem, DimensionChecks) {
  const auto A = ModeTuple<double>::constant(-MatrixXd::Identity(2, 2), 2);
  const auto Y = SymTuple<double>::identity(2, 2);
  MatrixXd G(2, 2);
  G << -1, 1, 1, -1;
  EXPECT_NO_THROW(MJLSProblem<double>(A, Y, CouplingMatrix<double>(G)));
  EXPECT_THROW(MJLSProblem<double>(A, SymTuple<double>::identity(3, 2), CouplingMatrix<double>(G)), DimensionError);
  EXPECT_THROW(MJLSProblem<double>(A, SymTuple<double>::identity(2, 3), CouplingMatrix<double>(G)), DimensionError);
  EXPECT_THROW(MJLSProblem<double>(ModeTuple<double>::constant(MatrixXd::Zero(2, 3), 2), Y, CouplingMatrix<double>(G)),
               DimensionError);
}

TEST(Residual, KnownExampleSolutionIsExact) {
  const auto ke = known_example();
  EXPECT_LE(residual_norm(ke.problem, ke.solution), 1e-11);
  EXPECT_EQ(residual_norm(ke.problem, ke.solution), 0.0);  // integer data, exact in floating point
}

TEST(Residual, ZeroTupleGivesNormOfY) {
  const auto ke = known_example();
  const SymTuple<double> zero(4, 2);
  double ref = 0;
  for (Index i = 0; i < 2; ++i) ref += ke.problem.Y().block(i).squaredNorm();
  EXPECT_DOUBLE_EQ(residual_norm(ke.problem, zero), std::sqrt(ref));
}

TEST(Residual, MatchesKroneckerAssembly) {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const auto P = oracle::random_small_problem(rng, 1 + t % 4, 1 + (t / 4) % 4);
    const auto X = oracle::random_tuple(rng, P.n(), P.modes());
    SymTuple<double> F = oracle::L(P, X);
    F += oracle::pi(P, X);
    F += P.Y();
    EXPECT_NEAR(residual_norm(P, X), norm(F), 1e-12 * norm(F));
  }
}

TEST(Residual, InvariantUnderModePermutation) {
  Rng rng(3);
  const auto P = oracle::random_small_problem(rng, 3, 4);
  const auto X = oracle::random_tuple(rng, 3, 4);
  std::vector<Index> perm = {2, 0, 3, 1};
  std::vector<MatrixXd> A, Y, Xs;
  MatrixXd G(4, 4);
  for (Index i = 0; i < 4; ++i) {
    A.push_back(P.A().block(perm[i]));
    Y.push_back(P.Y().block(perm[i]));
    Xs.push_back(X.block(perm[i]));
    for (Index j = 0; j < 4; ++j) G(i, j) = P.gamma()(perm[i], perm[j]);
  }
  const MJLSProblem<double> Q(ModeTuple<double>::from_blocks(A), SymTuple<double>::from_blocks(Y),
                              CouplingMatrix<double>(G));
  const double r1 = residual_norm(P, X), r2 = residual_norm(Q, SymTuple<double>::from_blocks(Xs));
  EXPECT_NEAR(r1, r2, 1e-14 * r1);
}

TEST(Residual, SquareRootOfObjective) {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto P = oracle::random_small_problem(rng, 3, 3);
    const auto X = oracle::random_tuple(rng, 3, 3);
    const double r = residual_norm(P, X);
    EXPECT_NEAR(r, std::sqrt(objective(P, X)), 1e-14 * r);
  }
}

TEST(ErrorNorm, TrivialCases) {
  const auto ke = known_example();
  EXPECT_EQ(error_norm(ke.solution, ke.solution), 0.0);
  const auto X = SymTuple<double>::identity(3, 1);
  const SymTuple<double> Z(3, 1);
  EXPECT_DOUBLE_EQ(error_norm(X, Z), std::sqrt(3.0));
  EXPECT_THROW(error_norm(X, SymTuple<double>(3, 2)), DimensionError);
}

TEST(Method, NamesRoundTrip) {
  for (Method m : {Method::Jacobi, Method::GaussSeidel, Method::KrylovGS, Method::KrylovJacobi,
                   Method::SteepestDescent, Method::ConjugateGradient, Method::TrustRegion, Method::Direct}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_FALSE(parse_method("newton").has_value());
}
