#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mjls/dense_linalg.hpp"
#include "mjls/errors.hpp"

namespace mjls {

using Index = Eigen::Index;

enum class Symmetrize { No, Yes };

/// N real matrices of equal shape rows x cols (the A_i, B_i or C_i of a
/// jump system). Blocks are stored side by side in one rows x (cols*N)
/// matrix, so block i is data().middleCols(i*cols, cols).
template <typename Scalar>
class ModeTuple {
 public:
  ModeTuple() = default;

  ModeTuple(Index rows, Index cols, Index modes) : rows_(rows), cols_(cols), modes_(modes) {
    if (rows < 1 || cols < 1 || modes < 1) {
      throw DimensionError("ModeTuple: dimensions must be positive");
    }
    data_ = Matrix<Scalar>::Zero(rows, cols * modes);
  }

  static ModeTuple from_blocks(const std::vector<Matrix<Scalar>>& blocks) {
    if (blocks.empty()) {
      throw DimensionError("ModeTuple: need at least one block");
    }
    ModeTuple t(blocks.front().rows(), blocks.front().cols(), static_cast<Index>(blocks.size()));
    for (Index i = 0; i < t.modes_; ++i) {
      const auto& b = blocks[static_cast<std::size_t>(i)];
      if (b.rows() != t.rows_ || b.cols() != t.cols_) {
        throw DimensionError("ModeTuple: block " + std::to_string(i + 1) + " has mismatching shape");
      }
      if (!b.allFinite()) {
        throw InvariantError("ModeTuple: block " + std::to_string(i + 1) + " has non-finite entries");
      }
      t.block(i) = b;
    }
    return t;
  }

  /// Same matrix in every mode.
  static ModeTuple constant(const Matrix<Scalar>& M, Index modes) {
    return from_blocks(std::vector<Matrix<Scalar>>(static_cast<std::size_t>(modes), M));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index modes() const { return modes_; }

  auto block(Index i) const { return data_.middleCols(i * cols_, cols_); }
  auto block(Index i) { return data_.middleCols(i * cols_, cols_); }

  const Matrix<Scalar>& data() const { return data_; }

  bool operator==(const ModeTuple& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && modes_ == o.modes_ && data_ == o.data_;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index modes_ = 0;
  Matrix<Scalar> data_;
};

/// Element X = (X_1, ..., X_N) of the product space of symmetric n x n
/// matrices, with inner product <X, Z> = sum_i tr(X_i^T Z_i).
///
/// Blocks are stored side by side in an n x (n*N) column-major matrix, so
/// stacked() views the same memory as the n^2 x N matrix [vec X_1, ..., vec X_N].
/// Mutable block access does not re-check symmetry; callers writing blocks
/// must keep them symmetric (or call symmetrize()).
template <typename Scalar>
class SymTuple {
 public:
  using StackedMap = Eigen::Map<Matrix<Scalar>>;
  using ConstStackedMap = Eigen::Map<const Matrix<Scalar>>;

  SymTuple() = default;

  /// Zero tuple.
  SymTuple(Index n, Index modes) : n_(n), modes_(modes) {
    if (n < 1 || modes < 1) {
      throw DimensionError("SymTuple: dimensions must be positive");
    }
    data_ = Matrix<Scalar>::Zero(n, n * modes);
  }

  static SymTuple zeros(Index n, Index modes) { return SymTuple(n, modes); }

  static SymTuple identity(Index n, Index modes) {
    SymTuple t(n, modes);
    for (Index i = 0; i < modes; ++i) t.block(i).setIdentity();
    return t;
  }

  static SymTuple from_blocks(const std::vector<Matrix<Scalar>>& blocks, Symmetrize mode = Symmetrize::No) {
    if (blocks.empty()) {
      throw DimensionError("SymTuple: need at least one block");
    }
    const Index n = blocks.front().rows();
    SymTuple t(n, static_cast<Index>(blocks.size()));
    for (Index i = 0; i < t.modes_; ++i) {
      const auto& b = blocks[static_cast<std::size_t>(i)];
      if (b.rows() != n || b.cols() != n) {
        throw DimensionError("SymTuple: block " + std::to_string(i + 1) + " is not " + std::to_string(n) + "x" +
                             std::to_string(n));
      }
      if (!b.allFinite()) {
        throw InvariantError("SymTuple: block " + std::to_string(i + 1) + " has non-finite entries");
      }
      if (mode == Symmetrize::No && !is_symmetric(b)) {
        throw InvariantError("SymTuple: block " + std::to_string(i + 1) + " is not symmetric");
      }
      t.block(i) = b;
    }
    if (mode == Symmetrize::Yes) t.symmetrize();
    return t;
  }

  /// Wraps an n x (n*N) block row.
  static SymTuple from_data(Matrix<Scalar> data, Index modes, Symmetrize mode = Symmetrize::No) {
    if (modes < 1 || data.rows() < 1 || data.cols() != data.rows() * modes) {
      throw DimensionError("SymTuple: data must be n x (n*N)");
    }
    SymTuple t;
    t.n_ = data.rows();
    t.modes_ = modes;
    t.data_ = std::move(data);
    if (mode == Symmetrize::Yes) {
      t.symmetrize();
    } else {
      for (Index i = 0; i < modes; ++i) {
        if (!is_symmetric(t.block(i))) {
          throw InvariantError("SymTuple: block " + std::to_string(i + 1) + " is not symmetric");
        }
      }
    }
    return t;
  }

  /// ||B - B^T||_max <= 1e-9 ||B||_max.
  template <typename Derived>
  static bool is_symmetric(const Eigen::MatrixBase<Derived>& B) {
    const Scalar scale = B.cwiseAbs().maxCoeff();
    return (B - B.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-9) * scale;
  }

  Index n() const { return n_; }
  Index modes() const { return modes_; }

  auto block(Index i) const { return data_.middleCols(i * n_, n_); }
  auto block(Index i) { return data_.middleCols(i * n_, n_); }

  const Matrix<Scalar>& data() const { return data_; }
  Matrix<Scalar>& data() { return data_; }

  /// n^2 x N view with column i = vec X_i.
  ConstStackedMap stacked() const { return ConstStackedMap(data_.data(), n_ * n_, modes_); }
  StackedMap stacked() { return StackedMap(data_.data(), n_ * n_, modes_); }

  /// Length N n^2 vector [vec X_1; ...; vec X_N].
  Eigen::Map<const Vector<Scalar>> vec() const { return {data_.data(), n_ * n_ * modes_}; }
  Eigen::Map<Vector<Scalar>> vec() { return {data_.data(), n_ * n_ * modes_}; }

  void symmetrize() {
    for (Index i = 0; i < modes_; ++i) {
      Matrix<Scalar> s = symmetric_part(block(i));
      block(i) = s;
    }
  }

  bool same_shape(const SymTuple& o) const { return n_ == o.n_ && modes_ == o.modes_; }

  SymTuple& operator+=(const SymTuple& o) {
    check_shape(o);
    data_ += o.data_;
    return *this;
  }
  SymTuple& operator-=(const SymTuple& o) {
    check_shape(o);
    data_ -= o.data_;
    return *this;
  }
  SymTuple& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  friend SymTuple operator+(SymTuple a, const SymTuple& b) { return a += b; }
  friend SymTuple operator-(SymTuple a, const SymTuple& b) { return a -= b; }
  friend SymTuple operator*(Scalar s, SymTuple a) { return a *= s; }
  friend SymTuple operator*(SymTuple a, Scalar s) { return a *= s; }
  friend SymTuple operator-(SymTuple a) { return a *= Scalar(-1); }

  /// this += s * o
  SymTuple& axpy(Scalar s, const SymTuple& o) {
    check_shape(o);
    data_ += s * o.data_;
    return *this;
  }

  friend Scalar dot(const SymTuple& a, const SymTuple& b) {
    a.check_shape(b);
    return a.data_.cwiseProduct(b.data_).sum();
  }
  friend Scalar squared_norm(const SymTuple& a) { return a.data_.squaredNorm(); }
  friend Scalar norm(const SymTuple& a) { return a.data_.norm(); }

  bool operator==(const SymTuple& o) const { return same_shape(o) && data_ == o.data_; }

 private:
  void check_shape(const SymTuple& o) const {
    if (!same_shape(o)) {
      throw DimensionError("SymTuple: shape mismatch (" + std::to_string(n_) + "x" + std::to_string(modes_) +
                           " vs " + std::to_string(o.n_) + "x" + std::to_string(o.modes_) + ")");
    }
  }

  Index n_ = 0;
  Index modes_ = 0;
  Matrix<Scalar> data_;
};

enum class CouplingKind {
  General,     // gamma_ii < 0, gamma_ij >= 0
  RateMatrix,  // additionally every row sums to zero; gamma_ii = 0 allowed
};

/// Coupling matrix Gamma = (gamma_ij) of the coupled equations.
template <typename Scalar>
class CouplingMatrix {
 public:
  CouplingMatrix() = default;

  explicit CouplingMatrix(Matrix<Scalar> gamma, CouplingKind kind = CouplingKind::General)
      : gamma_(std::move(gamma)), kind_(kind) {
    validate();
  }

  Index size() const { return gamma_.rows(); }
  CouplingKind kind() const { return kind_; }
  const Matrix<Scalar>& matrix() const { return gamma_; }
  Scalar operator()(Index i, Index j) const { return gamma_(i, j); }

  Vector<Scalar> diagonal() const { return gamma_.diagonal(); }

  /// Gamma with its diagonal set to zero.
  Matrix<Scalar> off_diagonal() const {
    Matrix<Scalar> g = gamma_;
    g.diagonal().setZero();
    return g;
  }

  /// Rows whose diagonal entry is exactly zero (only possible for rate
  /// matrices: an absorbing or isolated mode).
  std::vector<Index> zero_diagonal_rows() const {
    std::vector<Index> rows;
    for (Index i = 0; i < size(); ++i) {
      if (gamma_(i, i) == Scalar(0)) rows.push_back(i);
    }
    return rows;
  }

  bool operator==(const CouplingMatrix& o) const { return kind_ == o.kind_ && gamma_ == o.gamma_; }

 private:
  void validate() const {
    using std::abs;
    if (gamma_.rows() < 1 || gamma_.rows() != gamma_.cols()) {
      throw DimensionError("CouplingMatrix: must be square and non-empty");
    }
    if (!gamma_.allFinite()) {
      throw InvariantError("CouplingMatrix: non-finite entry");
    }
    const Index N = gamma_.rows();
    for (Index i = 0; i < N; ++i) {
      for (Index j = 0; j < N; ++j) {
        if (i != j && gamma_(i, j) < Scalar(0)) {
          throw InvariantError("CouplingMatrix: off-diagonal entry (" + std::to_string(i + 1) + "," +
                               std::to_string(j + 1) + ") is negative");
        }
      }
      if (kind_ == CouplingKind::General && !(gamma_(i, i) < Scalar(0))) {
        throw InvariantError("CouplingMatrix: diagonal entry (" + std::to_string(i + 1) + "," +
                             std::to_string(i + 1) + ") must be negative");
      }
      if (kind_ == CouplingKind::RateMatrix) {
        const Scalar scale = std::max(Scalar(1), gamma_.row(i).cwiseAbs().sum());
        if (abs(gamma_.row(i).sum()) > Scalar(1e-12) * scale) {
          throw InvariantError("CouplingMatrix: row " + std::to_string(i + 1) + " of rate matrix does not sum to zero");
        }
      }
    }
  }

  Matrix<Scalar> gamma_;
  CouplingKind kind_ = CouplingKind::General;
};

/// One instance of the coupled Lyapunov equations
///   A_i X_i + X_i A_i^T + sum_j gamma_ij X_j + Y_i = 0,  i = 1..N.
template <typename Scalar>
class MJLSProblem {
 public:
  MJLSProblem() = default;

  MJLSProblem(ModeTuple<Scalar> A, SymTuple<Scalar> Y, CouplingMatrix<Scalar> gamma)
      : A_(std::move(A)), Y_(std::move(Y)), gamma_(std::move(gamma)) {
    if (A_.rows() != A_.cols()) {
      throw DimensionError("MJLSProblem: A_i must be square");
    }
    if (A_.rows() != Y_.n()) {
      throw DimensionError("MJLSProblem: A_i and Y_i sizes differ");
    }
    if (A_.modes() != Y_.modes() || A_.modes() != gamma_.size()) {
      throw DimensionError("MJLSProblem: mode counts of A, Y and Gamma differ");
    }
  }

  Index n() const { return A_.rows(); }
  Index modes() const { return A_.modes(); }
  const ModeTuple<Scalar>& A() const { return A_; }
  const SymTuple<Scalar>& Y() const { return Y_; }
  const CouplingMatrix<Scalar>& gamma() const { return gamma_; }

  bool operator==(const MJLSProblem& o) const { return A_ == o.A_ && Y_ == o.Y_ && gamma_ == o.gamma_; }

 private:
  ModeTuple<Scalar> A_;
  SymTuple<Scalar> Y_;
  CouplingMatrix<Scalar> gamma_;
};

enum class Method {
  Jacobi,
  GaussSeidel,
  KrylovGS,
  KrylovJacobi,
  SteepestDescent,
  ConjugateGradient,
  TrustRegion,
  Direct,
};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Jacobi: return "jacobi";
    case Method::GaussSeidel: return "gauss-seidel";
    case Method::KrylovGS: return "krylov-gs";
    case Method::KrylovJacobi: return "krylov-jacobi";
    case Method::SteepestDescent: return "sd";
    case Method::ConjugateGradient: return "cg";
    case Method::TrustRegion: return "tr";
    case Method::Direct: return "direct";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::Jacobi, Method::GaussSeidel, Method::KrylovGS, Method::KrylovJacobi,
                   Method::SteepestDescent, Method::ConjugateGradient, Method::TrustRegion, Method::Direct}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

/// Outcome of one solver run. Iterations are fractional for the Krylov
/// methods, where every operator application counts as half a step.
struct SolverReport {
  Method method = Method::Direct;
  double iterations = 0.0;
  double residual = 0.0;
  double wall_time_s = 0.0;
  std::optional<double> error;
  bool converged = false;
  double tolerance = 0.0;
};

/// f_i(X) = A_i X_i + X_i A_i^T + sum_j gamma_ij X_j + Y_i for all i.
template <typename Scalar>
SymTuple<Scalar> residual_tuple(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  if (X.n() != P.n() || X.modes() != P.modes()) {
    throw DimensionError("residual: X does not match problem dimensions");
  }
  SymTuple<Scalar> F = P.Y();
  F.stacked().noalias() += X.stacked() * P.gamma().matrix().transpose();
  for (Index i = 0; i < P.modes(); ++i) {
    const Matrix<Scalar> AX = P.A().block(i) * X.block(i);
    F.block(i) += AX + AX.transpose();
  }
  return F;
}

/// sqrt(sum_i ||f_i(X)||_F^2); zero iff X solves the equations.
template <typename Scalar>
Scalar residual_norm(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  return norm(residual_tuple(P, X));
}

/// sqrt(sum_i ||X_i - Xref_i||_F^2).
template <typename Scalar>
Scalar error_norm(const SymTuple<Scalar>& X, const SymTuple<Scalar>& Xref) {
  if (!X.same_shape(Xref)) {
    throw DimensionError("error_norm: shape mismatch");
  }
  return (X.data() - Xref.data()).norm();
}

}  // namespace mjls
