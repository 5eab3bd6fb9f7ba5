#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "mjls/errors.hpp"
#include "mjls/fixedpoint.hpp"
#include "mjls/model.hpp"

namespace mjls {

// Least-squares formulation: minimize f(X) = sum_i ||f_i(X)||_F^2 over
// tuples X. The admissible set is the full product of square matrices, but
// every map below sends symmetric tuples to symmetric tuples, so starting from
// a symmetric X0 all iterates stay symmetric and we work in that subspace.

enum class InitialStep {
  Fixed,                   // first trial is alpha_bar
  QuadraticInterpolation,  // minimizer of the quadratic through f(0), f'(0), f(alpha_bar)
};

struct LineSearchParams {
  double alpha_bar = 1.0;
  double beta = 0.5;   // Armijo backtracking factor
  double sigma = 1e-4; // Armijo sufficient decrease
  double c1 = 1e-4;    // Wolfe sufficient decrease
  double c2 = 0.9;     // Wolfe curvature
  int max_backtracks = 60;
  int max_wolfe_iter = 100;
  InitialStep initial_step = InitialStep::Fixed;

  void validate() const {
    if (!(alpha_bar > 0.0)) throw ConfigError("LineSearchParams: alpha_bar must be positive");
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("LineSearchParams: beta must lie in (0, 1)");
    if (!(sigma > 0.0 && sigma < 1.0)) throw ConfigError("LineSearchParams: sigma must lie in (0, 1)");
    if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw ConfigError("LineSearchParams: need 0 < c1 < c2 < 1");
    if (max_backtracks < 1 || max_wolfe_iter < 1) throw ConfigError("LineSearchParams: iteration bounds must be positive");
  }
};

struct TrustRegionParams {
  /// Radius cap; defaults to 10 max(1, ||X0|| + ||grad f(X0)||).
  std::optional<double> delta_bar;
  /// Initial radius; defaults to delta_bar / 8.
  std::optional<double> delta0;
  double rho_prime = 0.1;
  /// Relative residual target of the inner truncated CG; defaults to
  /// min(0.5, sqrt(||grad f||)) per outer step.
  std::optional<double> tcg_tol;
  int tcg_max_iter = 1000;

  void validate() const {
    if (delta_bar && !(*delta_bar > 0.0)) throw ConfigError("TrustRegionParams: delta_bar must be positive");
    if (delta0 && !(*delta0 > 0.0)) throw ConfigError("TrustRegionParams: delta0 must be positive");
    if (delta_bar && delta0 && !(*delta0 < *delta_bar)) {
      throw ConfigError("TrustRegionParams: delta0 must lie in (0, delta_bar)");
    }
    if (!(rho_prime >= 0.0 && rho_prime < 0.25)) throw ConfigError("TrustRegionParams: rho_prime must lie in [0, 1/4)");
    if (tcg_tol && !(*tcg_tol > 0.0)) throw ConfigError("TrustRegionParams: tcg_tol must be positive");
    if (tcg_max_iter < 1) throw ConfigError("TrustRegionParams: tcg_max_iter must be positive");
  }
};

struct OptStopRule {
  double grad_tol = 1e-5;
  int max_iter = 30000;

  void validate() const {
    if (!(grad_tol > 0.0)) throw ConfigError("OptStopRule: grad_tol must be positive");
    if (max_iter < 1) throw ConfigError("OptStopRule: max_iter must be positive");
  }
};

/// Per-iteration trace handed to observers (tests use it to check monotonicity,
/// descent and radius invariants).
template <typename Scalar>
struct OptIterate {
  int k = 0;
  Scalar f = 0;           // objective after the step
  Scalar f_before = 0;    // objective before the step
  Scalar grad_norm = 0;   // at the new iterate
  Scalar slope = 0;       // <grad f(p_k), d_k> for line-search methods
  Scalar step_norm = 0;   // ||d_k|| (trust region) or t_k ||d_k||
  Scalar radius = 0;      // trust region radius used for this step
  Scalar radius_next = 0;
  Scalar ratio = 0;       // actual / predicted decrease
  bool accepted = true;
};

template <typename Scalar>
using OptObserver = std::function<void(const OptIterate<Scalar>&)>;

namespace detail {

/// X -> (A_i X_i + X_i A_i^T + sum_j gamma_ij X_j)_i, the linear part of f_i.
template <typename Scalar>
SymTuple<Scalar> linear_part(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  SymTuple<Scalar> Z(P.n(), P.modes());
  Z.stacked().noalias() = X.stacked() * P.gamma().matrix().transpose();
  for (Index i = 0; i < P.modes(); ++i) {
    Z.block(i).noalias() += P.A().block(i) * X.block(i);
    Z.block(i).noalias() += X.block(i) * P.A().block(i).transpose();
  }
  return Z;
}

/// Adjoint of linear_part: F -> (A_i^T F_i + F_i A_i + sum_j gamma_ji F_j)_i.
template <typename Scalar>
SymTuple<Scalar> adjoint_part(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& F) {
  SymTuple<Scalar> Z(P.n(), P.modes());
  Z.stacked().noalias() = F.stacked() * P.gamma().matrix();
  for (Index i = 0; i < P.modes(); ++i) {
    const Matrix<Scalar> FA = F.block(i) * P.A().block(i);
    Z.block(i) += FA + FA.transpose();
  }
  return Z;
}

}  // namespace detail

/// f(X) = sum_i ||A_i X_i + X_i A_i^T + sum_j gamma_ij X_j + Y_i||_F^2.
template <typename Scalar>
Scalar objective(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  detail::check_tuple(P, X, "objective");
  SymTuple<Scalar> F = detail::linear_part(P, X);
  F += P.Y();
  Scalar f = 0;
  for (Index i = 0; i < P.modes(); ++i) f += F.block(i).squaredNorm();
  return f;
}

/// grad f(X) = (D_1, ..., D_N), D_i = 2 (A_i^T f_i + f_i A_i + sum_j gamma_ji f_j).
/// Note the transposed coupling gamma_ji.
template <typename Scalar>
SymTuple<Scalar> gradient(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X) {
  detail::check_tuple(P, X, "gradient");
  SymTuple<Scalar> F = detail::linear_part(P, X);
  F += P.Y();
  F.symmetrize();
  SymTuple<Scalar> D = detail::adjoint_part(P, F);
  D *= Scalar(2);
  D.symmetrize();
  return D;
}

/// Hess f [xi] = 2 (L+Pi)^* (L+Pi)(xi); independent of the base point since f is quadratic.
template <typename Scalar>
SymTuple<Scalar> hessian_apply(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& xi) {
  detail::check_tuple(P, xi, "hessian_apply");
  SymTuple<Scalar> F = detail::linear_part(P, xi);
  F.symmetrize();
  SymTuple<Scalar> D = detail::adjoint_part(P, F);
  D *= Scalar(2);
  D.symmetrize();
  return D;
}

namespace detail {

template <typename Scalar>
Scalar armijo_search(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& p, const SymTuple<Scalar>& d, Scalar f0,
                     Scalar slope, const LineSearchParams& ls) {
  if (!(slope < Scalar(0))) {
    throw LineSearchError("armijo_step: direction is not a descent direction (<grad f, d> >= 0)");
  }
  Scalar t = Scalar(ls.alpha_bar);
  for (int gamma = 0; gamma <= ls.max_backtracks; ++gamma) {
    SymTuple<Scalar> trial = p;
    trial.axpy(t, d);
    if (objective(P, trial) <= f0 + Scalar(ls.sigma) * t * slope) return t;
    t *= Scalar(ls.beta);
  }
  throw LineSearchError("armijo_step: no admissible step after " + std::to_string(ls.max_backtracks) +
                        " backtracks");
}

template <typename Scalar>
Scalar wolfe_search(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& p, const SymTuple<Scalar>& d, Scalar f0,
                    Scalar slope, const LineSearchParams& ls) {
  if (!(slope < Scalar(0))) {
    throw LineSearchError("wolfe_step: direction is not a descent direction (<grad f, d> >= 0)");
  }
  const Scalar c1 = Scalar(ls.c1), c2 = Scalar(ls.c2);
  auto at = [&](Scalar t) {
    SymTuple<Scalar> q = p;
    q.axpy(t, d);
    return q;
  };
  auto phi = [&](Scalar t) { return objective(P, at(t)); };
  auto dphi = [&](Scalar t) { return dot(gradient(P, at(t)), d); };

  Scalar t = Scalar(ls.alpha_bar);
  if (ls.initial_step == InitialStep::QuadraticInterpolation) {
    const Scalar f_bar = phi(t);
    const Scalar curv = f_bar - f0 - slope * t;
    if (curv > Scalar(0)) t = -slope * t * t / (Scalar(2) * curv);
  }

  Scalar lo = 0, f_lo = f0, g_lo = slope;
  Scalar hi = std::numeric_limits<Scalar>::infinity(), f_hi = 0;
  for (int it = 0; it < ls.max_wolfe_iter; ++it) {
    const Scalar ft = phi(t);
    if (ft > f0 + c1 * t * slope || !std::isfinite(ft)) {
      hi = t;
      f_hi = ft;
    } else {
      const Scalar gt = dphi(t);
      if (gt >= c2 * slope) return t;
      // Still descending: move the lower end and extrapolate by a secant on phi'.
      const Scalar t_old = lo, g_old = g_lo;
      lo = t;
      f_lo = ft;
      g_lo = gt;
      if (!std::isfinite(hi)) {
        Scalar next = Scalar(2) * t;
        if (gt > g_old) next = t - gt * (t - t_old) / (gt - g_old);
        t = std::clamp(next, Scalar(1.1) * t, Scalar(10) * t);
        continue;
      }
    }
    // Bracket [lo, hi]: minimizer of the quadratic through f(lo), f'(lo), f(hi).
    const Scalar w = hi - lo;
    const Scalar curv = f_hi - f_lo - g_lo * w;
    Scalar next = lo + w / Scalar(2);
    if (std::isfinite(f_hi) && curv > Scalar(0)) next = lo - g_lo * w * w / (Scalar(2) * curv);
    t = std::clamp(next, lo + Scalar(0.1) * w, hi - Scalar(0.1) * w);
  }
  throw LineSearchError("wolfe_step: no Wolfe point within " + std::to_string(ls.max_wolfe_iter) +
                        " trials (bracket [" + std::to_string(static_cast<double>(lo)) + ", " +
                        std::to_string(static_cast<double>(hi)) + "])");
}

}  // namespace detail

/// Armijo step t = beta^gamma alpha_bar with gamma the smallest nonnegative
/// integer such that f(p + t d) <= f(p) + sigma t <grad f(p), d>.
template <typename Scalar>
Scalar armijo_step(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& p, const SymTuple<Scalar>& d,
                   const LineSearchParams& ls = {}) {
  ls.validate();
  return detail::armijo_search(P, p, d, objective(P, p), dot(gradient(P, p), d), ls);
}

/// Step satisfying the (weak) Wolfe conditions
///   f(p + t d) <= f(p) + c1 t <grad f(p), d>,
///   <grad f(p + t d), d> >= c2 <grad f(p), d>.
template <typename Scalar>
Scalar wolfe_step(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& p, const SymTuple<Scalar>& d,
                  const LineSearchParams& ls = {}) {
  ls.validate();
  return detail::wolfe_search(P, p, d, objective(P, p), dot(gradient(P, p), d), ls);
}

/// Steepest descent with Armijo steps.
template <typename Scalar>
Solution<Scalar> solve_sd(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X0, const OptStopRule& stop = {},
                          const LineSearchParams& ls = {}, const OptObserver<Scalar>& observer = {}) {
  stop.validate();
  ls.validate();
  detail::check_tuple(P, X0, "solve_sd");
  detail::Stopwatch clock;
  Solution<Scalar> sol{X0, {}};
  SymTuple<Scalar>& p = sol.X;
  Scalar f = objective(P, p);
  SymTuple<Scalar> g = gradient(P, p);
  int k = 0;
  while (!(norm(g) < Scalar(stop.grad_tol)) && k < stop.max_iter) {
    const SymTuple<Scalar> d = -g;
    const Scalar slope = -squared_norm(g);
    const Scalar t = detail::armijo_search(P, p, d, f, slope, ls);
    p.axpy(t, d);
    p.symmetrize();
    const Scalar f_before = f;
    f = objective(P, p);
    g = gradient(P, p);
    ++k;
    if (observer) {
      OptIterate<Scalar> it;
      it.k = k;
      it.f = f;
      it.f_before = f_before;
      it.grad_norm = norm(g);
      it.slope = slope;
      it.step_norm = t * norm(d);
      observer(it);
    }
  }
  sol.report.converged = norm(g) < Scalar(stop.grad_tol);
  sol.report.iterations = k;
  detail::finish_report(P, sol, Method::SteepestDescent, stop.grad_tol, clock);
  return sol;
}

/// Nonlinear CG with the Dai-Yuan parameter
///   beta_k = ||g_k||^2 / <d_{k-1}, g_k - g_{k-1}>
/// and Wolfe steps. A vanishing denominator restarts with d = -g.
template <typename Scalar>
Solution<Scalar> solve_cg(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X0, const OptStopRule& stop = {},
                          const LineSearchParams& ls = {}, const OptObserver<Scalar>& observer = {}) {
  stop.validate();
  ls.validate();
  detail::check_tuple(P, X0, "solve_cg");
  detail::Stopwatch clock;
  Solution<Scalar> sol{X0, {}};
  SymTuple<Scalar>& p = sol.X;
  Scalar f = objective(P, p);
  SymTuple<Scalar> g = gradient(P, p);
  SymTuple<Scalar> d = -g;
  int k = 0;
  while (!(norm(g) < Scalar(stop.grad_tol)) && k < stop.max_iter) {
    Scalar slope = dot(g, d);
    if (!(slope < Scalar(0))) {
      d = -g;
      slope = -squared_norm(g);
    }
    const Scalar t = detail::wolfe_search(P, p, d, f, slope, ls);
    p.axpy(t, d);
    p.symmetrize();
    const Scalar f_before = f;
    f = objective(P, p);
    SymTuple<Scalar> g_new = gradient(P, p);
    const Scalar denom = dot(d, g_new - g);
    const Scalar step = t * norm(d);
    if (std::abs(denom) < Scalar(1e-300)) {
      d = -g_new;
    } else {
      const Scalar beta = squared_norm(g_new) / denom;
      d *= beta;
      d -= g_new;
    }
    d.symmetrize();
    g = std::move(g_new);
    ++k;
    if (observer) {
      OptIterate<Scalar> it;
      it.k = k;
      it.f = f;
      it.f_before = f_before;
      it.grad_norm = norm(g);
      it.slope = slope;
      it.step_norm = step;
      observer(it);
    }
  }
  sol.report.converged = norm(g) < Scalar(stop.grad_tol);
  sol.report.iterations = k;
  detail::finish_report(P, sol, Method::ConjugateGradient, stop.grad_tol, clock);
  return sol;
}

enum class TcgStop { ZeroGradient, Interior, Boundary, NegativeCurvature, MaxIter };

template <typename Scalar>
struct TcgResult {
  SymTuple<Scalar> d;
  /// m(0) - m(d) = -<g, d> - 1/2 <H d, d>.
  Scalar model_decrease = 0;
  int iterations = 0;
  TcgStop stop = TcgStop::ZeroGradient;
};

/// Steihaug-Toint truncated CG for min <g, d> + 1/2 <H d, d> subject to
/// ||d|| <= delta. Stops at the boundary, on nonpositive curvature, or once
/// the model gradient satisfies ||g + H d|| <= tol ||g||.
template <typename Scalar, typename HessOp>
TcgResult<Scalar> tcg(const SymTuple<Scalar>& g, HessOp&& H, Scalar delta, Scalar tol, int max_iter) {
  if (!(delta > Scalar(0))) throw ConfigError("tcg: radius must be positive");
  TcgResult<Scalar> res{SymTuple<Scalar>(g.n(), g.modes()), Scalar(0), 0, TcgStop::ZeroGradient};
  const Scalar gnorm = norm(g);
  if (gnorm == Scalar(0)) return res;

  SymTuple<Scalar>& d = res.d;
  SymTuple<Scalar> Hd(g.n(), g.modes());
  SymTuple<Scalar> r = g;  // model gradient g + H d
  SymTuple<Scalar> p = -g;
  Scalar rr = squared_norm(r);

  auto to_boundary = [&](const SymTuple<Scalar>& Hp, TcgStop why) {
    const Scalar dp = dot(d, p), pp = squared_norm(p), dd = squared_norm(d);
    const Scalar tau = (-dp + std::sqrt(std::max(Scalar(0), dp * dp + pp * (delta * delta - dd)))) / pp;
    d.axpy(tau, p);
    Hd.axpy(tau, Hp);
    res.stop = why;
  };

  res.stop = TcgStop::MaxIter;
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    const SymTuple<Scalar> Hp = H(p);
    const Scalar kappa = dot(p, Hp);
    if (kappa <= Scalar(0)) {
      to_boundary(Hp, TcgStop::NegativeCurvature);
      break;
    }
    const Scalar alpha = rr / kappa;
    SymTuple<Scalar> d_next = d;
    d_next.axpy(alpha, p);
    if (norm(d_next) >= delta) {
      to_boundary(Hp, TcgStop::Boundary);
      break;
    }
    d = std::move(d_next);
    Hd.axpy(alpha, Hp);
    r.axpy(alpha, Hp);
    const Scalar rr_next = squared_norm(r);
    if (std::sqrt(rr_next) <= tol * gnorm) {
      res.stop = TcgStop::Interior;
      break;
    }
    p *= rr_next / rr;
    p -= r;
    rr = rr_next;
  }
  res.model_decrease = -dot(g, d) - dot(Hd, d) / Scalar(2);
  return res;
}

/// Trust-region method with truncated-CG subproblems. Radius update:
/// ratio < 1/4 shrinks by 4; ratio > 3/4 on the boundary doubles (capped at
/// delta_bar); the step is accepted iff ratio > rho_prime. A nonpositive model
/// decrease counts as ratio = -inf.
template <typename Scalar>
Solution<Scalar> solve_tr(const MJLSProblem<Scalar>& P, const SymTuple<Scalar>& X0, const OptStopRule& stop = {},
                          const TrustRegionParams& trp = {}, const OptObserver<Scalar>& observer = {}) {
  stop.validate();
  trp.validate();
  detail::check_tuple(P, X0, "solve_tr");
  detail::Stopwatch clock;
  Solution<Scalar> sol{X0, {}};
  SymTuple<Scalar>& p = sol.X;
  Scalar f = objective(P, p);
  SymTuple<Scalar> g = gradient(P, p);

  const Scalar delta_bar = trp.delta_bar ? Scalar(*trp.delta_bar)
                                         : Scalar(10) * std::max(Scalar(1), norm(X0) + norm(g));
  Scalar delta = trp.delta0 ? Scalar(*trp.delta0) : delta_bar / Scalar(8);
  if (!(delta < delta_bar)) throw ConfigError("solve_tr: delta0 must lie in (0, delta_bar)");

  auto H = [&P](const SymTuple<Scalar>& xi) { return hessian_apply(P, xi); };
  int k = 0;
  while (!(norm(g) < Scalar(stop.grad_tol)) && k < stop.max_iter) {
    const Scalar gnorm = norm(g);
    const Scalar inner_tol = trp.tcg_tol ? Scalar(*trp.tcg_tol) : std::min(Scalar(0.5), std::sqrt(gnorm));
    TcgResult<Scalar> sub = tcg(g, H, delta, inner_tol, trp.tcg_max_iter);

    SymTuple<Scalar> trial = p + sub.d;
    const Scalar f_trial = objective(P, trial);
    const Scalar pred = sub.model_decrease;
    Scalar ratio = -std::numeric_limits<Scalar>::infinity();
    if (pred > Scalar(0)) ratio = (f - f_trial) / pred;

    const Scalar dnorm = norm(sub.d);
    const Scalar delta_used = delta;
    const bool on_boundary = std::abs(dnorm - delta) <= Scalar(1e-12) * delta;
    if (ratio < Scalar(0.25)) {
      delta /= Scalar(4);
    } else if (ratio > Scalar(0.75) && on_boundary) {
      delta = std::min(Scalar(2) * delta, delta_bar);
    }
    const bool accept = ratio > Scalar(trp.rho_prime);
    const Scalar f_before = f;
    if (accept) {
      p = std::move(trial);
      p.symmetrize();
      f = f_trial;
      g = gradient(P, p);
    }
    ++k;
    if (observer) {
      OptIterate<Scalar> it;
      it.k = k;
      it.f = f;
      it.f_before = f_before;
      it.grad_norm = norm(g);
      it.step_norm = dnorm;
      it.radius = delta_used;
      it.radius_next = delta;
      it.ratio = ratio;
      it.accepted = accept;
      observer(it);
    }
  }
  sol.report.converged = norm(g) < Scalar(stop.grad_tol);
  sol.report.iterations = k;
  detail::finish_report(P, sol, Method::TrustRegion, stop.grad_tol, clock);
  return sol;
}

}  // namespace mjls
