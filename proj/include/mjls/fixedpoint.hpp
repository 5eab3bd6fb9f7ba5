#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "mjls/errors.hpp"
#include "mjls/model.hpp"
#include "mjls/operators.hpp"

namespace mjls {

struct FixedPointConfig {
  /// Plain sweeps: bound on residual_norm relative to max(1, ||Y||).
  /// Krylov methods: bound on the preconditioned relative residual.
  double tol = 1e-9;
  int max_iter = 1000;
  Method method = Method::KrylovGS;
  /// Optional absolute bound on residual_norm(P, X) that must hold as well
  /// before a run counts as converged.
  std::optional<double> residual_target;

  void validate() const {
    if (!(tol > 0.0 && tol < 1.0)) throw ConfigError("FixedPointConfig: tol must lie in (0, 1)");
    if (residual_target && !(*residual_target > 0.0)) {
      throw ConfigError("FixedPointConfig: residual_target must be positive");
    }
    if (max_iter < 1) throw ConfigError("FixedPointConfig: max_iter must be positive");
  }
};

template <typename Scalar>
struct Solution {
  SymTuple<Scalar> X;
  SolverReport report;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Matrix-free BiCGSTAB on the tuple space with <X, Z> = sum_i tr(X_i^T Z_i).
///
/// Stops once ||b - op(X)|| <= tol ||b|| (recurrence residual). Every
/// application of op counts as half an iteration, so a run can end on a
/// half step. A breakdown (rho or omega vanishing relative to 1e-14 times the
/// norms involved) triggers one restart from the current iterate; a second
/// breakdown raises BreakdownError. Exhausting max_iter returns the last
/// iterate with converged = false. When `accept` is given, an iterate that
/// passes the residual test is only taken if accept(x) also holds; otherwise
/// the recurrence carries on.
template <typename Scalar, typename Op>
Solution<Scalar> bicgstab(Op&& op, const SymTuple<Scalar>& b, Scalar tol, int max_iter,
                          const std::function<bool(const SymTuple<Scalar>&)>& accept = {}) {
  detail::Stopwatch clock;
  Solution<Scalar> sol{SymTuple<Scalar>(b.n(), b.modes()), {}};
  SolverReport& rep = sol.report;
  rep.method = Method::KrylovGS;
  rep.tolerance = static_cast<double>(tol);

  const Scalar bnorm = norm(b);
  if (bnorm == Scalar(0)) {
    rep.converged = true;
    return sol;
  }
  const Scalar target = tol * bnorm;
  const Scalar tiny = Scalar(1e-14);
  int applications = 0;
  auto apply = [&](const SymTuple<Scalar>& v) {
    ++applications;
    return op(v);
  };

  SymTuple<Scalar>& x = sol.X;
  SymTuple<Scalar> r = b;
  SymTuple<Scalar> r_hat = r;
  SymTuple<Scalar> p(b.n(), b.modes()), v(b.n(), b.modes());
  Scalar rho_old = 1, alpha = 1, omega = 1;
  bool fresh = true;
  bool restarted = false;

  auto breakdown = [&](const char* what) {
    if (restarted) {
      throw BreakdownError(std::string("bicgstab: ") + what + " after restart");
    }
    restarted = true;
    r = b - apply(x);
    r_hat = r;
    fresh = true;
  };

  while (applications < 2 * max_iter) {
    const Scalar rho = dot(r_hat, r);
    if (std::abs(rho) < tiny * norm(r_hat) * norm(r)) {
      breakdown("rho vanished");
      continue;
    }
    if (fresh) {
      p = r;
      fresh = false;
    } else {
      const Scalar beta = (rho / rho_old) * (alpha / omega);
      p.axpy(-omega, v);
      p *= beta;
      p += r;
    }
    v = apply(p);
    const Scalar denom = dot(r_hat, v);
    if (std::abs(denom) < tiny * norm(r_hat) * norm(v)) {
      breakdown("<r_hat, v> vanished");
      continue;
    }
    alpha = rho / denom;
    SymTuple<Scalar> s = r;
    s.axpy(-alpha, v);
    const Scalar snorm = norm(s);
    if (snorm <= target) {
      SymTuple<Scalar> candidate = x;
      candidate.axpy(alpha, p);
      if (!accept || accept(candidate)) {
        x = std::move(candidate);
        rep.residual = static_cast<double>(snorm);
        rep.converged = true;
        break;
      }
    }
    if (applications >= 2 * max_iter) {
      x.axpy(alpha, p);
      rep.residual = static_cast<double>(snorm);
      break;
    }
    const SymTuple<Scalar> t = apply(s);
    const Scalar ts = dot(t, s);
    const Scalar tnorm = norm(t);
    if (tnorm == Scalar(0) || std::abs(ts) < tiny * tnorm * snorm) {
      x.axpy(alpha, p);
      r = s;
      breakdown("omega vanished");
      continue;
    }
    omega = ts / (tnorm * tnorm);
    x.axpy(alpha, p);
    x.axpy(omega, s);
    r = s;
    r.axpy(-omega, t);
    rho_old = rho;
    const Scalar rnorm = norm(r);
    rep.residual = static_cast<double>(rnorm);
    if (rnorm <= target && (!accept || accept(x))) {
      rep.converged = true;
      break;
    }
  }
  x.symmetrize();
  rep.iterations = 0.5 * applications;
  rep.wall_time_s = clock.seconds();
  return sol;
}

namespace detail {

template <typename Scalar>
void finish_report(const MJLSProblem<Scalar>& P, Solution<Scalar>& sol, Method m, double tol,
                   const Stopwatch& clock) {
  sol.report.method = m;
  sol.report.tolerance = tol;
  sol.report.residual = static_cast<double>(residual_norm(P, sol.X));
  sol.report.wall_time_s = clock.seconds();
}

}  // namespace detail

template <typename Scalar>
using IterateObserver = std::function<void(int, const SymTuple<Scalar>&)>;

namespace detail {

/// Stopping bound of the plain sweeps.
template <typename Scalar>
Scalar sweep_target(const MJLSProblem<Scalar>& P, const FixedPointConfig& cfg) {
  Scalar t = Scalar(cfg.tol) * std::max(Scalar(1), norm(P.Y()));
  if (cfg.residual_target) t = std::min(t, Scalar(*cfg.residual_target));
  return t;
}

template <typename Scalar>
std::function<bool(const SymTuple<Scalar>&)> residual_check(const MJLSProblem<Scalar>& P,
                                                            const FixedPointConfig& cfg) {
  if (!cfg.residual_target) return {};
  const Scalar bound = Scalar(*cfg.residual_target);
  return [&P, bound](const SymTuple<Scalar>& X) { return residual_norm(P, X) <= bound; };
}

}  // namespace detail

/// Jacobi sweeps X <- -L^{-1}(Pi(X) + Y) from X = 0, stopping once
/// residual_norm(P, X) <= tol max(1, ||Y||) (and <= residual_target if set).
template <typename Scalar>
Solution<Scalar> solve_jacobi(const MJLSProblem<Scalar>& P, const FixedPointConfig& cfg,
                              const IterateObserver<Scalar>& observer = {}) {
  cfg.validate();
  detail::Stopwatch clock;
  const ShiftedModes<Scalar> M(P);
  const Scalar target = detail::sweep_target(P, cfg);
  Solution<Scalar> sol{SymTuple<Scalar>(P.n(), P.modes()), {}};
  Scalar res = residual_norm(P, sol.X);
  int k = 0;
  while (res > target && k < cfg.max_iter) {
    SymTuple<Scalar> R = P.Y();
    R.stacked().noalias() += sol.X.stacked() * M.coupling_off_diagonal().transpose();
    for (Index i = 0; i < P.modes(); ++i) {
      sol.X.block(i) = M.solver(i).solve(R.block(i));
    }
    ++k;
    if (observer) observer(k, sol.X);
    res = residual_norm(P, sol.X);
  }
  sol.report.converged = res <= target;
  sol.report.iterations = k;
  detail::finish_report(P, sol, Method::Jacobi, cfg.tol, clock);
  return sol;
}

/// Gauss-Seidel sweeps: as Jacobi, but mode i already uses the updated X_j, j < i.
template <typename Scalar>
Solution<Scalar> solve_gauss_seidel(const MJLSProblem<Scalar>& P, const FixedPointConfig& cfg,
                                    const IterateObserver<Scalar>& observer = {}) {
  cfg.validate();
  detail::Stopwatch clock;
  const ShiftedModes<Scalar> M(P);
  const Index n = P.n();
  const Scalar target = detail::sweep_target(P, cfg);
  Solution<Scalar> sol{SymTuple<Scalar>(n, P.modes()), {}};
  Vector<Scalar> rhs(n * n);
  Scalar res = residual_norm(P, sol.X);
  int k = 0;
  while (res > target && k < cfg.max_iter) {
    for (Index i = 0; i < P.modes(); ++i) {
      rhs.noalias() = sol.X.stacked() * M.coupling_off_diagonal().row(i).transpose();
      Matrix<Scalar> R = Eigen::Map<const Matrix<Scalar>>(rhs.data(), n, n) + P.Y().block(i);
      sol.X.block(i) = M.solver(i).solve(R);
    }
    ++k;
    if (observer) observer(k, sol.X);
    res = residual_norm(P, sol.X);
  }
  sol.report.converged = res <= target;
  sol.report.iterations = k;
  detail::finish_report(P, sol, Method::GaussSeidel, cfg.tol, clock);
  return sol;
}

/// Krylov iteration with Gauss-Seidel preconditioning: BiCGSTAB on
/// (I - T_GS)(X) = Yt with Yt from precondition_rhs. The reported residual is
/// recomputed on the original equations.
template <typename Scalar>
Solution<Scalar> solve_krylov_gs(const MJLSProblem<Scalar>& P, const FixedPointConfig& cfg) {
  cfg.validate();
  detail::Stopwatch clock;
  const ShiftedModes<Scalar> M(P);
  const SymTuple<Scalar> rhs = precondition_rhs(M, P.Y());
  auto op = [&M](const SymTuple<Scalar>& X) { return X - apply_T_GS(M, X); };
  Solution<Scalar> sol = bicgstab(op, rhs, Scalar(cfg.tol), cfg.max_iter, detail::residual_check(P, cfg));
  detail::finish_report(P, sol, Method::KrylovGS, cfg.tol, clock);
  return sol;
}

/// Krylov iteration with Jacobi preconditioning: BiCGSTAB on
/// (I - T_J)(X) = -L^{-1}(Y), T_J = -L^{-1} Pi.
template <typename Scalar>
Solution<Scalar> solve_krylov_jacobi(const MJLSProblem<Scalar>& P, const FixedPointConfig& cfg) {
  cfg.validate();
  detail::Stopwatch clock;
  const ShiftedModes<Scalar> M(P);
  const SymTuple<Scalar> rhs = -apply_Linv(M, P.Y());
  auto op = [&M](const SymTuple<Scalar>& X) { return X - apply_T_J(M, X); };
  Solution<Scalar> sol = bicgstab(op, rhs, Scalar(cfg.tol), cfg.max_iter, detail::residual_check(P, cfg));
  detail::finish_report(P, sol, Method::KrylovJacobi, cfg.tol, clock);
  return sol;
}

}  // namespace mjls
