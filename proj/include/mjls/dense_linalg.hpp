#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <vector>

#include "mjls/errors.hpp"

namespace mjls {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Real Schur decomposition A = U T U^T with U orthogonal and T
/// quasi-upper-triangular (1x1 and 2x2 diagonal blocks, the latter only for
/// complex conjugate pairs).
template <typename Scalar>
struct SchurForm {
  Matrix<Scalar> U;
  Matrix<Scalar> T;
};

/// Diagonal block of a quasi-triangular matrix.
struct DiagonalBlock {
  Eigen::Index start;
  Eigen::Index size;  // 1 or 2
};

template <typename Derived>
SchurForm<typename Derived::Scalar> real_schur(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  if (A.rows() != A.cols()) {
    throw DimensionError("real_schur: matrix must be square");
  }
  if (A.rows() == 0) {
    throw DimensionError("real_schur: empty matrix");
  }
  if (!A.allFinite()) {
    throw InvariantError("real_schur: non-finite entry");
  }
  Eigen::RealSchur<Matrix<Scalar>> schur(A.eval(), true);
  if (schur.info() != Eigen::Success) {
    throw ConvergenceError("real_schur: QR iteration did not converge");
  }
  return {schur.matrixU(), schur.matrixT()};
}

/// Partition of a quasi-upper-triangular matrix into its diagonal blocks.
template <typename Derived>
std::vector<DiagonalBlock> diagonal_blocks(const Eigen::MatrixBase<Derived>& T) {
  std::vector<DiagonalBlock> blocks;
  const Eigen::Index n = T.rows();
  for (Eigen::Index i = 0; i < n;) {
    if (i + 1 < n && T(i + 1, i) != typename Derived::Scalar(0)) {
      blocks.push_back({i, 2});
      i += 2;
    } else {
      blocks.push_back({i, 1});
      i += 1;
    }
  }
  return blocks;
}

/// Eigenvalues carried by the diagonal blocks of a quasi-triangular T, in
/// block order.
template <typename Derived>
std::vector<std::complex<typename Derived::Scalar>> schur_eigenvalues(const Eigen::MatrixBase<Derived>& T) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::sqrt;
  std::vector<std::complex<Scalar>> out;
  out.reserve(static_cast<std::size_t>(T.rows()));
  for (const auto& b : diagonal_blocks(T)) {
    const Eigen::Index i = b.start;
    if (b.size == 1) {
      out.emplace_back(T(i, i), Scalar(0));
      continue;
    }
    const Scalar a = T(i, i), bb = T(i, i + 1), c = T(i + 1, i), d = T(i + 1, i + 1);
    const Scalar mean = (a + d) / 2;
    const Scalar half = (a - d) / 2;
    const Scalar disc = half * half + bb * c;
    if (disc < 0) {
      const Scalar im = sqrt(-disc);
      out.emplace_back(mean, im);
      out.emplace_back(mean, -im);
    } else {
      const Scalar re = sqrt(disc);
      out.emplace_back(mean + re, Scalar(0));
      out.emplace_back(mean - re, Scalar(0));
    }
  }
  return out;
}

template <typename Derived>
std::vector<std::complex<typename Derived::Scalar>> eigenvalues(const Eigen::MatrixBase<Derived>& A) {
  return schur_eigenvalues(real_schur(A).T);
}

/// Largest real part over the spectrum of A.
template <typename Derived>
typename Derived::Scalar spectral_abscissa(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  for (const auto& lambda : eigenvalues(A)) {
    best = std::max(best, lambda.real());
  }
  return best;
}

/// Bartels-Stewart solver for A X + X A^T + Q = 0 with the Schur form of A
/// computed once. Construction fails with SingularLyapunovError when some
/// eigenvalue pair satisfies |lambda_i + lambda_j| < 1e-12 ||A||_F.
template <typename Scalar>
class LyapunovSolver {
 public:
  LyapunovSolver() = default;

  explicit LyapunovSolver(const Matrix<Scalar>& A) : schur_(real_schur(A)) {
    blocks_ = diagonal_blocks(schur_.T);
    eigenvalues_ = schur_eigenvalues(schur_.T);
    const Scalar threshold = Scalar(1e-12) * A.norm();
    for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
      for (std::size_t j = i; j < eigenvalues_.size(); ++j) {
        const Scalar gap = std::abs(eigenvalues_[i] + eigenvalues_[j]);
        if (gap < threshold || gap == Scalar(0)) {
          const std::complex<double> li(static_cast<double>(eigenvalues_[i].real()),
                                        static_cast<double>(eigenvalues_[i].imag()));
          const std::complex<double> lj(static_cast<double>(eigenvalues_[j].real()),
                                        static_cast<double>(eigenvalues_[j].imag()));
          std::ostringstream msg;
          msg << "singular Lyapunov operator: lambda_i + lambda_j ~ 0 for lambda_i = " << li
              << ", lambda_j = " << lj;
          throw SingularLyapunovError(li, lj, msg.str());
        }
      }
    }
  }

  Eigen::Index size() const { return schur_.T.rows(); }
  const SchurForm<Scalar>& schur() const { return schur_; }
  const std::vector<std::complex<Scalar>>& eigenvalues() const { return eigenvalues_; }

  /// Returns the symmetric X with A X + X A^T + Q = 0.
  template <typename Derived>
  Matrix<Scalar> solve(const Eigen::MatrixBase<Derived>& Q) const {
    const Eigen::Index n = size();
    if (Q.rows() != n || Q.cols() != n) {
      throw DimensionError("LyapunovSolver::solve: right-hand side has wrong shape");
    }
    const Matrix<Scalar>& U = schur_.U;
    const Matrix<Scalar>& T = schur_.T;
    // T Z + Z T^T = C in Schur coordinates.
    const Matrix<Scalar> C = -(U.transpose() * Q * U);
    Matrix<Scalar> Z = Matrix<Scalar>::Zero(n, n);

    using Small = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
    const auto nb = static_cast<std::ptrdiff_t>(blocks_.size());
    for (std::ptrdiff_t l = nb - 1; l >= 0; --l) {
      const auto [ls, lq] = blocks_[static_cast<std::size_t>(l)];
      const Eigen::Index l_end = ls + lq;
      for (std::ptrdiff_t k = l; k >= 0; --k) {
        const auto [ks, kp] = blocks_[static_cast<std::size_t>(k)];
        const Eigen::Index k_end = ks + kp;
        Small R = C.block(ks, ls, kp, lq);
        if (k_end < n) {
          R.noalias() -= T.block(ks, k_end, kp, n - k_end) * Z.block(k_end, ls, n - k_end, lq);
        }
        if (l_end < n) {
          R.noalias() -= Z.block(ks, l_end, kp, n - l_end) * T.block(ls, l_end, lq, n - l_end).transpose();
        }
        Small Zkl(kp, lq);
        if (kp == 1 && lq == 1) {
          Zkl(0, 0) = R(0, 0) / (T(ks, ks) + T(ls, ls));
        } else {
          // (I_q (x) T_kk + T_ll (x) I_p) vec Z = vec R
          const Eigen::Index m = kp * lq;
          Small K = Small::Zero(m, m);
          for (Eigen::Index c = 0; c < lq; ++c) {
            K.block(c * kp, c * kp, kp, kp) += T.block(ks, ks, kp, kp);
            for (Eigen::Index d = 0; d < lq; ++d) {
              K.block(c * kp, d * kp, kp, kp).diagonal().array() += T(ls + c, ls + d);
            }
          }
          Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 4, 1> rhs(m);
          for (Eigen::Index c = 0; c < lq; ++c) rhs.segment(c * kp, kp) = R.col(c);
          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 4, 1> z = K.fullPivLu().solve(rhs);
          for (Eigen::Index c = 0; c < lq; ++c) Zkl.col(c) = z.segment(c * kp, kp);
        }
        Z.block(ks, ls, kp, lq) = Zkl;
        Z.block(ls, ks, lq, kp) = Zkl.transpose();
      }
    }
    Matrix<Scalar> X = U * Z * U.transpose();
    return (X + X.transpose()) / Scalar(2);
  }

 private:
  SchurForm<Scalar> schur_;
  std::vector<DiagonalBlock> blocks_;
  std::vector<std::complex<Scalar>> eigenvalues_;
};

/// Solves A X + X A^T + Q = 0. The result is exactly symmetric.
template <typename DerivedA, typename DerivedQ>
Matrix<typename DerivedA::Scalar> lyap_solve(const Eigen::MatrixBase<DerivedA>& A,
                                             const Eigen::MatrixBase<DerivedQ>& Q) {
  using Scalar = typename DerivedA::Scalar;
  if (A.rows() != A.cols() || Q.rows() != A.rows() || Q.cols() != A.cols()) {
    throw DimensionError("lyap_solve: A and Q must be square of equal size");
  }
  return LyapunovSolver<Scalar>(A.eval()).solve(Q);
}

/// Returns (M + M^T) / 2.
template <typename Derived>
Matrix<typename Derived::Scalar> symmetric_part(const Eigen::MatrixBase<Derived>& M) {
  return (M + M.transpose()) / typename Derived::Scalar(2);
}

}  // namespace mjls
