#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>

#include <string>
#include <vector>

#include "mjls/dense_linalg.hpp"
#include "mjls/errors.hpp"
#include "mjls/model.hpp"

namespace mjls {

/// Shifted mode matrices A_i + (gamma_ii / 2) I together with their cached
/// Schur forms, plus the off-diagonal part of Gamma. Built once per problem;
/// every inverse application afterwards is a Schur-coordinate back-substitution.
template <typename Scalar>
class ShiftedModes {
 public:
  explicit ShiftedModes(const MJLSProblem<Scalar>& P) : n_(P.n()), offdiag_(P.gamma().off_diagonal()) {
    const Index N = P.modes();
    shifted_.reserve(static_cast<std::size_t>(N));
    solvers_.reserve(static_cast<std::size_t>(N));
    for (Index i = 0; i < N; ++i) {
      Matrix<Scalar> S = P.A().block(i);
      S.diagonal().array() += P.gamma()(i, i) / Scalar(2);
      try {
        solvers_.emplace_back(S);
      } catch (const SingularLyapunovError& e) {
        throw SingularLyapunovError(e.lambda_i(), e.lambda_j(), "mode " + std::to_string(i + 1) + ": " + e.what());
      }
      shifted_.push_back(std::move(S));
    }
  }

  Index n() const { return n_; }
  Index modes() const { return static_cast<Index>(shifted_.size()); }
  const Matrix<Scalar>& shifted(Index i) const { return shifted_[static_cast<std::size_t>(i)]; }
  const LyapunovSolver<Scalar>& solver(Index i) const { return solvers_[static_cast<std::size_t>(i)]; }
  const Matrix<Scalar>& coupling_off_diagonal() const { return offdiag_; }

 private:
  Index n_;
  Matrix<Scalar> offdiag_;
  std::vector<Matrix<Scalar>> shifted_;
  std::vector<LyapunovSolver<Scalar>> solvers_;
};

namespace detail {

template <typename Scalar>
void check_tuple(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X, const char* who) {
  if (X.n() != P.n() || X.modes() != P.modes()) {
    throw DimensionError(std::string(who) + ": tuple does not match problem dimensions");
  }
}

template <typename Scalar>
void check_tuple(const ShiftedModes<Scalar>& M, const SymTuple<Scalar>& X, const char* who) {
  if (X.n() != M.n() || X.modes() != M.modes()) {
    throw DimensionError(std::string(who) + ": tuple does not match problem dimensions");
  }
}

}  // namespace detail

/// L(X)_i = (A_i + gamma_ii/2 I) X_i + X_i (A_i + gamma_ii/2 I)^T.
template <typename Scalar>
SymTuple<Scalar> apply_L(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  detail::check_tuple(P, X, "apply_L");
  SymTuple<Scalar> Z(P.n(), P.modes());
  for (Index i = 0; i < P.modes(); ++i) {
    Matrix<Scalar> SX = P.A().block(i) * X.block(i);
    SX += (P.gamma()(i, i) / Scalar(2)) * X.block(i);
    Z.block(i) = SX + SX.transpose();
  }
  return Z;
}

/// Pi(X)_i = sum_{j != i} gamma_ij X_j, evaluated as one product of the
/// stacked n^2 x N matrix [vec X_1 ... vec X_N] with the off-diagonal Gamma^T.
template <typename Scalar>
SymTuple<Scalar> apply_Pi(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  detail::check_tuple(P, X, "apply_Pi");
  SymTuple<Scalar> Z(P.n(), P.modes());
  Z.stacked().noalias() = X.stacked() * P.gamma().off_diagonal().transpose();
  return Z;
}

template <typename Scalar>
SymTuple<Scalar> apply_LplusPi(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  SymTuple<Scalar> Z = apply_L(P, X);
  Z += apply_Pi(P, X);
  return Z;
}

/// L^{-1}: returns X with L(X) = Z (N independent Lyapunov solves).
template <typename Scalar>
SymTuple<Scalar> apply_Linv(const ShiftedModes<Scalar>& M, const SymTuple<Scalar>& Z) {
  detail::check_tuple(M, Z, "apply_Linv");
  SymTuple<Scalar> X(M.n(), M.modes());
  for (Index i = 0; i < M.modes(); ++i) {
    X.block(i) = M.solver(i).solve(-Z.block(i));
  }
  return X;
}

template <typename Scalar>
SymTuple<Scalar> apply_Linv(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& Z) {
  return apply_Linv(ShiftedModes<Scalar>(P), Z);
}

/// Jacobi map T_J = -L^{-1} Pi.
template <typename Scalar>
SymTuple<Scalar> apply_T_J(const ShiftedModes<Scalar>& M, const SymTuple<Scalar>& X) {
  detail::check_tuple(M, X, "apply_T_J");
  SymTuple<Scalar> R(M.n(), M.modes());
  R.stacked().noalias() = X.stacked() * M.coupling_off_diagonal().transpose();
  SymTuple<Scalar> out(M.n(), M.modes());
  for (Index i = 0; i < M.modes(); ++i) {
    // -L_i^{-1}(R_i) is the X_i with S_i X_i + X_i S_i^T + R_i = 0.
    out.block(i) = M.solver(i).solve(R.block(i));
  }
  return out;
}

/// Gauss-Seidel map T_GS. Sweeps i = 1..N in order:
///   Xt_i = -L_i^{-1}( sum_{j<i} gamma_ij Xt_j + sum_{j>i} gamma_ij X_j ).
template <typename Scalar>
SymTuple<Scalar> apply_T_GS(const ShiftedModes<Scalar>& M, const SymTuple<Scalar>& X) {
  detail::check_tuple(M, X, "apply_T_GS");
  const Index n = M.n();
  SymTuple<Scalar> W = X;
  Vector<Scalar> rhs(n * n);
  for (Index i = 0; i < M.modes(); ++i) {
    // Row i of the off-diagonal Gamma has a zero at i, so the stale W_i drops out.
    rhs.noalias() = W.stacked() * M.coupling_off_diagonal().row(i).transpose();
    W.block(i) = M.solver(i).solve(Eigen::Map<const Matrix<Scalar>>(rhs.data(), n, n));
  }
  return W;
}

template <typename Scalar>
SymTuple<Scalar> apply_T_GS(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  return apply_T_GS(ShiftedModes<Scalar>(P), X);
}

/// Gauss-Seidel preconditioned right-hand side
///   Yt_i = -L_i^{-1}( Y_i + sum_{j<i} gamma_ij Yt_j ),
/// so that (I - T_GS)(X) = Yt has the same solution as (L + Pi)(X) = -Y.
template <typename Scalar>
SymTuple<Scalar> precondition_rhs(const ShiftedModes<Scalar>& M, const SymTuple<Scalar>& Y) {
  detail::check_tuple(M, Y, "precondition_rhs");
  const Index n = M.n();
  SymTuple<Scalar> Yt(n, M.modes());
  Vector<Scalar> rhs(n * n);
  for (Index i = 0; i < M.modes(); ++i) {
    // Yt_j is still zero for j >= i.
    rhs.noalias() = Yt.stacked() * M.coupling_off_diagonal().row(i).transpose();
    Matrix<Scalar> R = Eigen::Map<const Matrix<Scalar>>(rhs.data(), n, n) + Y.block(i);
    Yt.block(i) = M.solver(i).solve(R);
  }
  return Yt;
}

template <typename Scalar>
SymTuple<Scalar> precondition_rhs(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& Y) {
  return precondition_rhs(ShiftedModes<Scalar>(P), Y);
}

/// Largest N n^2 accepted by the Kronecker assembly.
inline constexpr Index kKroneckerGuard = 20000;

/// Dense N n^2 x N n^2 matrix of L + Pi on column-stacked tuples:
/// block (i, j) = delta_ij (I (x) A_i + A_i (x) I) + gamma_ij I.
template <typename Scalar>
Matrix<Scalar> assemble_kron(const MJLSProblem<Scalar>& P) {
  const Index n = P.n(), N = P.modes(), n2 = n * n;
  if (N * n2 > kKroneckerGuard) {
    throw SizeGuardError("assemble_kron: N n^2 = " + std::to_string(N * n2) + " exceeds guard " +
                         std::to_string(kKroneckerGuard));
  }
  Matrix<Scalar> M = Matrix<Scalar>::Zero(N * n2, N * n2);
  for (Index i = 0; i < N; ++i) {
    const auto A = P.A().block(i);
    auto D = M.block(i * n2, i * n2, n2, n2);
    for (Index c = 0; c < n; ++c) {
      // I (x) A: A on the diagonal blocks.
      D.block(c * n, c * n, n, n) += A;
      // A (x) I: a_cd I in block (c, d).
      for (Index d = 0; d < n; ++d) {
        D.block(c * n, d * n, n, n).diagonal().array() += A(c, d);
      }
    }
    for (Index j = 0; j < N; ++j) {
      M.block(i * n2, j * n2, n2, n2).diagonal().array() += P.gamma()(i, j);
    }
  }
  return M;
}

/// Kronecker-product solve of (L + Pi)(X) = -Y by LU with partial pivoting.
template <typename Scalar>
SymTuple<Scalar> solve_direct(const MJLSProblem<Scalar>& P) {
  const Matrix<Scalar> M = assemble_kron(P);
  Eigen::PartialPivLU<Matrix<Scalar>> lu(M);
  const Scalar rcond = lu.rcond();
  if (!(rcond > Scalar(64) * Eigen::NumTraits<Scalar>::epsilon())) {
    throw SingularError("solve_direct: Kronecker matrix is singular (rcond estimate " +
                        std::to_string(static_cast<double>(rcond)) + ")");
  }
  SymTuple<Scalar> X(P.n(), P.modes());
  X.vec() = lu.solve(-P.Y().vec());
  X.symmetrize();
  return X;
}

}  // namespace mjls
