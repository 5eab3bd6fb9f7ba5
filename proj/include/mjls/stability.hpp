#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <string_view>
#include <vector>

#include "mjls/dense_linalg.hpp"
#include "mjls/errors.hpp"
#include "mjls/model.hpp"
#include "mjls/operators.hpp"

namespace mjls {

enum class StabilityVerdict { Stable, Unstable, Indeterminate };
enum class RadiusMethod { Arnoldi, KroneckerEigen };

inline std::string_view to_string(StabilityVerdict v) {
  switch (v) {
    case StabilityVerdict::Stable: return "stable";
    case StabilityVerdict::Unstable: return "unstable";
    case StabilityVerdict::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

inline std::string_view to_string(RadiusMethod m) {
  return m == RadiusMethod::Arnoldi ? "arnoldi" : "kronecker-eigen";
}

struct StabilityOptions {
  /// Evaluate the Kronecker eigenvalue test alongside the operator test when
  /// N n^2 does not exceed this.
  Index kronecker_limit = 2000;
  /// Relative Ritz residual at which the dominant eigenvalue is accepted.
  double power_tol = 1e-10;
  /// Also accept once the Collatz-Wielandt bracket [lo, hi] has hi - lo <= bracket_tol hi.
  double bracket_tol = 1e-8;
  /// Also accept once the bracket excludes this value (the verdict is then settled).
  std::optional<double> decide_threshold;
  int krylov_dim = 30;
  int max_restarts = 200;
};

template <typename Scalar>
struct RadiusEstimate {
  Scalar value = 0;
  RadiusMethod method = RadiusMethod::Arnoldi;
  bool converged = false;
  /// Applications of T_J.
  int iterations = 0;
  /// Collatz-Wielandt enclosure of rho at the final Ritz vector, when it is
  /// positive definite (a rigorous bracket up to rounding).
  std::optional<Scalar> lower, upper;
};

/// Mean-square stability certificate. `stable` holds iff every shifted mode
/// A_i + gamma_ii/2 I is Hurwitz and rho(L^{-1} Pi) < 1.
template <typename Scalar>
struct StabilityCertificate {
  std::vector<Scalar> modewise_abscissae;
  Scalar rho_LinvPi = std::numeric_limits<Scalar>::infinity();
  RadiusMethod method = RadiusMethod::Arnoldi;
  bool rho_converged = false;
  /// Collatz-Wielandt bracket around rho_LinvPi, when available.
  std::optional<Scalar> rho_lower, rho_upper;
  /// Spectral abscissa of the assembled L + Pi, when it was evaluated.
  std::optional<Scalar> kronecker_abscissa;
  /// rho(L^{-1} Pi) from dense eigenvalues, when evaluated.
  std::optional<Scalar> kronecker_rho;
  StabilityVerdict verdict = StabilityVerdict::Indeterminate;
  bool stable = false;
};

namespace detail {

template <typename Scalar>
std::vector<Scalar> shifted_abscissae(const MJLSProblem<Scalar>& P) {
  std::vector<Scalar> out;
  for (Index i = 0; i < P.modes(); ++i) {
    Matrix<Scalar> S = P.A().block(i);
    S.diagonal().array() += P.gamma()(i, i) / Scalar(2);
    out.push_back(spectral_abscissa(S));
  }
  return out;
}

/// Dense rho(M_L^{-1} M_Pi) with M_L block diagonal.
template <typename Scalar>
Scalar kronecker_rho(const MJLSProblem<Scalar>& P) {
  const Index n2 = P.n() * P.n(), N = P.modes();
  const Matrix<Scalar> M = assemble_kron(P);
  Matrix<Scalar> K = Matrix<Scalar>::Zero(N * n2, N * n2);
  for (Index i = 0; i < N; ++i) {
    const Eigen::PartialPivLU<Matrix<Scalar>> lu(M.block(i * n2, i * n2, n2, n2));
    for (Index j = 0; j < N; ++j) {
      if (i == j || P.gamma()(i, j) == Scalar(0)) continue;
      K.block(i * n2, j * n2, n2, n2) = lu.inverse() * P.gamma()(i, j);
    }
  }
  Eigen::EigenSolver<Matrix<Scalar>> es(K, false);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("kronecker_rho: eigenvalue iteration failed");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

template <typename Scalar>
Scalar kronecker_abscissa(const MJLSProblem<Scalar>& P) {
  Eigen::EigenSolver<Matrix<Scalar>> es(assemble_kron(P), false);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("kronecker_abscissa: eigenvalue iteration failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

/// Collatz-Wielandt bounds for the positive map T_J at a positive definite
/// tuple x: with y = T_J(x), min_i lambda_min(x_i^{-1} y_i) <= rho(T_J) <=
/// max_i lambda_max(x_i^{-1} y_i). Empty when some x_i is not positive definite.
template <typename Scalar>
std::optional<std::pair<Scalar, Scalar>> collatz_wielandt(const ShiftedModes<Scalar>& M, const SymTuple<Scalar>& x) {
  const SymTuple<Scalar> y = apply_T_J(M, x);
  Scalar lo = std::numeric_limits<Scalar>::infinity(), hi = 0;
  for (Index i = 0; i < M.modes(); ++i) {
    const Eigen::LLT<Matrix<Scalar>> llt(x.block(i));
    if (llt.info() != Eigen::Success) return std::nullopt;
    // Eigenvalues of L^{-1} y_i L^{-T} with x_i = L L^T.
    Matrix<Scalar> W = llt.matrixL().solve(Matrix<Scalar>(y.block(i)));
    W = llt.matrixL().solve(Matrix<Scalar>(W.transpose()));
    const Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(symmetric_part(W), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
    hi = std::max(hi, es.eigenvalues().maxCoeff());
  }
  return std::make_pair(std::max(lo, Scalar(0)), hi);
}

/// Thick-restarted Arnoldi for the dominant eigenvalue of T_J = -L^{-1} Pi.
/// T_J maps positive semidefinite tuples into themselves, so rho(T_J) is
/// itself an eigenvalue with a semidefinite eigenvector; among the Ritz values
/// of largest modulus the one with largest real part is tracked. Each restart
/// keeps an orthonormal basis of the invariant subspace of H belonging to the
/// leading Ritz values, which preserves the Arnoldi relation
///   T V = V H + v_next h^T
/// with h nonzero only in its last entry after the next extension step.
template <typename Scalar>
RadiusEstimate<Scalar> arnoldi_rho(const ShiftedModes<Scalar>& M, const StabilityOptions& opt) {
  using std::size_t;
  RadiusEstimate<Scalar> est;
  est.method = RadiusMethod::Arnoldi;
  if (M.coupling_off_diagonal().cwiseAbs().maxCoeff() == Scalar(0)) {
    est.converged = true;
    est.lower = est.upper = Scalar(0);
    return est;
  }
  const Index dim = M.modes() * M.n() * (M.n() + 1) / 2;
  const Index m = std::max<Index>(1, std::min<Index>(opt.krylov_dim, dim));
  const Index keep_target = std::max<Index>(1, m / 3);

  SymTuple<Scalar> start = SymTuple<Scalar>::identity(M.n(), M.modes());
  std::vector<SymTuple<Scalar>> V{start * (Scalar(1) / norm(start))};
  Matrix<Scalar> H = Matrix<Scalar>::Zero(m + 1, m);
  Index k = 0;  // columns of H already filled
  int applications = 0;
  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    bool invariant = false;
    for (Index j = k; j < m; ++j) {
      SymTuple<Scalar> w = apply_T_J(M, V[static_cast<size_t>(j)]);
      ++applications;
      const Scalar wnorm = norm(w);
      for (int pass = 0; pass < 2; ++pass) {
        for (Index i = 0; i <= j; ++i) {
          const Scalar h = dot(V[static_cast<size_t>(i)], w);
          H(i, j) += h;
          w.axpy(-h, V[static_cast<size_t>(i)]);
        }
      }
      H(j + 1, j) = norm(w);
      k = j + 1;
      if (H(j + 1, j) <= Scalar(1e-13) * std::max(wnorm, Scalar(1e-300))) {
        invariant = true;
        break;
      }
      V.push_back(w * (Scalar(1) / H(j + 1, j)));
    }

    const Matrix<Scalar> Hk = H.topLeftCorner(k, k);
    Eigen::EigenSolver<Matrix<Scalar>> es(Hk, true);
    if (es.info() != Eigen::Success) break;
    const auto& lam = es.eigenvalues();
    std::vector<Index> order(static_cast<size_t>(k));
    for (Index j = 0; j < k; ++j) order[static_cast<size_t>(j)] = j;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(lam(a)) > std::abs(lam(b)); });
    const Scalar near_top = (Scalar(1) - Scalar(1e-8)) * std::abs(lam(order[0]));
    Index pick = order[0];
    for (Index j : order) {
      if (std::abs(lam(j)) < near_top) break;
      if (lam(j).real() > lam(pick).real()) pick = j;
    }
    const Vector<Scalar> y = es.eigenvectors().col(pick).real();
    SymTuple<Scalar> ritz(M.n(), M.modes());
    for (Index j = 0; j < k; ++j) ritz.axpy(y(j), V[static_cast<size_t>(j)]);
    ritz.symmetrize();
    Scalar tr = 0;
    for (Index i = 0; i < M.modes(); ++i) tr += ritz.block(i).trace();
    if (tr < Scalar(0)) ritz *= Scalar(-1);

    est.value = std::abs(lam(pick));
    est.iterations = applications;
    const Scalar resid =
        invariant ? Scalar(0) : H(k, k - 1) * std::abs(y(k - 1)) / std::max(y.norm(), Scalar(1e-300));
    est.lower.reset();
    est.upper.reset();
    if (auto bnd = collatz_wielandt(M, ritz)) {
      est.lower = bnd->first;
      est.upper = bnd->second;
    }
    const bool ritz_done = invariant || est.value == Scalar(0) || resid <= Scalar(opt.power_tol) * est.value;
    const bool bracket_done = est.upper && *est.upper - *est.lower <= Scalar(opt.bracket_tol) * *est.upper;
    const bool decided = est.upper && opt.decide_threshold &&
                         (*est.upper < Scalar(*opt.decide_threshold) || *est.lower >= Scalar(*opt.decide_threshold));
    if (ritz_done || bracket_done || decided) {
      est.converged = true;
      break;
    }

    // Thick restart: real basis for the leading invariant subspace of H_k,
    // taking complex pairs whole.
    std::vector<Vector<Scalar>> cols;
    for (size_t t = 0; t < order.size() && static_cast<Index>(cols.size()) < keep_target; ++t) {
      const Index j = order[t];
      if (lam(j).imag() < Scalar(0)) continue;  // its conjugate carries the pair
      cols.push_back(es.eigenvectors().col(j).real());
      if (lam(j).imag() > Scalar(0)) cols.push_back(es.eigenvectors().col(j).imag());
    }
    Matrix<Scalar> Z(k, static_cast<Index>(cols.size()));
    for (Index c = 0; c < Z.cols(); ++c) Z.col(c) = cols[static_cast<size_t>(c)];
    const Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(Z);
    const Index r = std::max<Index>(1, qr.rank());
    const Matrix<Scalar> Q = (qr.householderQ() * Matrix<Scalar>::Identity(k, k)).leftCols(r);

    std::vector<SymTuple<Scalar>> W;
    for (Index c = 0; c < r; ++c) {
      SymTuple<Scalar> v(M.n(), M.modes());
      for (Index j = 0; j < k; ++j) v.axpy(Q(j, c), V[static_cast<size_t>(j)]);
      W.push_back(std::move(v));
    }
    Matrix<Scalar> Hn = Matrix<Scalar>::Zero(m + 1, m);
    Hn.topLeftCorner(r, r) = Q.transpose() * Hk * Q;
    Hn.block(r, 0, 1, r) = H(k, k - 1) * Q.row(k - 1);
    W.push_back(std::move(V[static_cast<size_t>(k)]));
    V = std::move(W);
    H = std::move(Hn);
    k = r;
  }
  return est;
}

}  // namespace detail

/// rho(L^{-1} Pi). Requires every shifted mode to be Hurwitz (StabilityError
/// otherwise). Arnoldi first; if it stalls and N n^2 is within the
/// Kronecker limit, dense eigenvalues are used instead.
template <typename Scalar>
RadiusEstimate<Scalar> spectral_radius_LinvPi(const MJLSProblem<Scalar>& P, const StabilityOptions& opt = {}) {
  const auto abscissae = detail::shifted_abscissae(P);
  for (std::size_t i = 0; i < abscissae.size(); ++i) {
    if (!(abscissae[i] < Scalar(0))) {
      throw StabilityError("spectral_radius_LinvPi: shifted mode " + std::to_string(i + 1) + " is not Hurwitz");
    }
  }
  auto est = detail::arnoldi_rho(ShiftedModes<Scalar>(P), opt);
  if (!est.converged && P.modes() * P.n() * P.n() <= opt.kronecker_limit) {
    est.value = detail::kronecker_rho(P);
    est.method = RadiusMethod::KroneckerEigen;
    est.converged = true;
    est.lower.reset();
    est.upper.reset();
  }
  return est;
}

/// Mean-square stability test: sigma(L) in C_- and rho(L^{-1} Pi) < 1, with the
/// equivalent sigma(L + Pi) in C_- evaluated on the assembled Kronecker matrix
/// for small instances. Disagreement between the two yields Indeterminate.
template <typename Scalar>
StabilityCertificate<Scalar> is_ms_stable(const MJLSProblem<Scalar>& P, const StabilityOptions& opt = {}) {
  StabilityCertificate<Scalar> cert;
  cert.modewise_abscissae = detail::shifted_abscissae(P);
  const bool modes_hurwitz = std::all_of(cert.modewise_abscissae.begin(), cert.modewise_abscissae.end(),
                                         [](Scalar a) { return a < Scalar(0); });
  const bool small = P.modes() * P.n() * P.n() <= opt.kronecker_limit;

  std::optional<StabilityVerdict> operator_verdict;
  if (!modes_hurwitz) {
    operator_verdict = StabilityVerdict::Unstable;
    cert.rho_converged = true;
  } else {
    StabilityOptions o = opt;
    if (!o.decide_threshold) o.decide_threshold = 1.0;
    auto est = detail::arnoldi_rho(ShiftedModes<Scalar>(P), o);
    cert.rho_LinvPi = est.value;
    cert.method = est.method;
    cert.rho_converged = est.converged;
    cert.rho_lower = est.lower;
    cert.rho_upper = est.upper;
    if (small) {
      cert.kronecker_rho = detail::kronecker_rho(P);
      if (!est.converged) {
        cert.rho_LinvPi = *cert.kronecker_rho;
        cert.method = RadiusMethod::KroneckerEigen;
        cert.rho_converged = true;
      }
    }
    if (cert.rho_upper && *cert.rho_upper < Scalar(1)) {
      operator_verdict = StabilityVerdict::Stable;
    } else if (cert.rho_lower && *cert.rho_lower >= Scalar(1)) {
      operator_verdict = StabilityVerdict::Unstable;
    } else if (cert.rho_converged) {
      operator_verdict = cert.rho_LinvPi < Scalar(1) ? StabilityVerdict::Stable : StabilityVerdict::Unstable;
    }
  }

  if (small) {
    cert.kronecker_abscissa = detail::kronecker_abscissa(P);
    const auto kron_verdict =
        *cert.kronecker_abscissa < Scalar(0) ? StabilityVerdict::Stable : StabilityVerdict::Unstable;
    cert.verdict = (operator_verdict && *operator_verdict == kron_verdict) ? kron_verdict
                                                                           : StabilityVerdict::Indeterminate;
  } else {
    cert.verdict = operator_verdict.value_or(StabilityVerdict::Indeterminate);
  }
  cert.stable = cert.verdict == StabilityVerdict::Stable;
  return cert;
}

template <typename Scalar>
struct ScaledProblem {
  MJLSProblem<Scalar> problem;
  Scalar scale = 1;
  Scalar rho = 0;
};

/// Multiplies the off-diagonal entries of Gamma by one factor s > 0 so that
/// rho(L^{-1} Pi) lands in [0.9 target, target]. The diagonal is kept, so L is
/// unchanged and rho scales linearly in s. The returned rho is the scaled
/// upper bound.
template <typename Scalar>
ScaledProblem<Scalar> scale_coupling(const MJLSProblem<Scalar>& P, Scalar target_rho, const StabilityOptions& opt = {}) {
  if (!(target_rho > Scalar(0) && target_rho < Scalar(1))) {
    throw ConfigError("scale_coupling: target rho must lie in (0, 1)");
  }
  RadiusEstimate<Scalar> est;
  StabilityOptions o = opt;
  o.bracket_tol = std::max(o.bracket_tol, 1e-3);
  try {
    est = spectral_radius_LinvPi(P, o);
  } catch (const StabilityError& e) {
    throw StabilityError(std::string("scale_coupling: cannot reach target by scaling: ") + e.what());
  }
  if (!est.converged) {
    throw ConvergenceError("scale_coupling: spectral radius estimate did not converge");
  }
  const Scalar lo = est.lower.value_or(est.value), hi = est.upper.value_or(est.value);
  if (hi == Scalar(0) || (lo >= Scalar(0.9) * target_rho && hi <= target_rho)) {
    return {P, Scalar(1), hi};
  }
  if (lo < Scalar(0.9) * hi) {
    throw ConvergenceError("scale_coupling: spectral radius bracket [" + std::to_string(static_cast<double>(lo)) +
                           ", " + std::to_string(static_cast<double>(hi)) + "] too wide to hit the target");
  }
  // Scale the upper bound to just below the target.
  const Scalar s = target_rho / hi * (Scalar(1) - Scalar(1e-7));
  Matrix<Scalar> g = P.gamma().off_diagonal() * s;
  g.diagonal() = P.gamma().diagonal();
  MJLSProblem<Scalar> scaled(P.A(), P.Y(), CouplingMatrix<Scalar>(g, CouplingKind::General));
  return {std::move(scaled), s, hi * s};
}

}  // namespace mjls
