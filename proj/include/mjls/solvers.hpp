#pragma once

#include <optional>

#include "mjls/fixedpoint.hpp"
#include "mjls/model.hpp"
#include "mjls/operators.hpp"
#include "mjls/optimization.hpp"

namespace mjls {

/// Settings for every method behind `solve`. Fixed-point and Krylov methods
/// read `fixed_point`; the optimization methods read `stop` and their line
/// search or trust-region parameters.
struct SolveOptions {
  FixedPointConfig fixed_point;
  OptStopRule stop;
  LineSearchParams line_search;
  TrustRegionParams trust_region;
  /// Start for the optimization methods; zero tuple when absent.
  std::optional<MatrixXd> X0_data;
};

template <typename Scalar>
Solution<Scalar> solve(const MJLSProblem<Scalar>& P, Method method, const SolveOptions& opt = {}) {
  FixedPointConfig fp = opt.fixed_point;
  fp.method = method;
  const auto start = [&] {
    if (!opt.X0_data) return SymTuple<Scalar>(P.n(), P.modes());
    SymTuple<Scalar> X0 = SymTuple<Scalar>::from_data(opt.X0_data->template cast<Scalar>(), P.modes());
    detail::check_tuple(P, X0, "solve");
    return X0;
  };
  switch (method) {
    case Method::Jacobi: return solve_jacobi(P, fp);
    case Method::GaussSeidel: return solve_gauss_seidel(P, fp);
    case Method::KrylovGS: return solve_krylov_gs(P, fp);
    case Method::KrylovJacobi: return solve_krylov_jacobi(P, fp);
    case Method::SteepestDescent: return solve_sd(P, start(), opt.stop, opt.line_search);
    case Method::ConjugateGradient: return solve_cg(P, start(), opt.stop, opt.line_search);
    case Method::TrustRegion: return solve_tr(P, start(), opt.stop, opt.trust_region);
    case Method::Direct: {
      detail::Stopwatch clock;
      Solution<Scalar> sol{solve_direct(P), {}};
      sol.report.converged = true;
      detail::finish_report(P, sol, Method::Direct, 0.0, clock);
      return sol;
    }
  }
  throw ConfigError("solve: unknown method");
}

}  // namespace mjls
