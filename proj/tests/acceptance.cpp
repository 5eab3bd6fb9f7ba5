// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mjls/generators.hpp"
#include "mjls/solvers.hpp"
#include "mjls/stability.hpp"
#include "oracles.hpp"
#include "theta_table.hpp"

using namespace mjls;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void check(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    o.detail += " [miss: " + what + "]";
  }
}

SolveOptions krylov_options(double tol, double residual_target) {
  SolveOptions opt;
  opt.fixed_point.tol = tol;
  opt.fixed_point.residual_target = residual_target;
  return opt;
}

// 1 ---------------------------------------------------------------------------
Outcome known_solution() {
  Outcome o;
  const auto ke = known_example();
  Clock c;
  const auto sol = solve(ke.problem, Method::KrylovGS, krylov_options(1e-9, 1e-10));
  const double t = c.seconds();
  const double err = error_norm(sol.X, ke.solution);
  const auto plain = solve_krylov_gs(ke.problem, FixedPointConfig{});
  o.detail = "iterations " + fmt("%.1f", sol.report.iterations) + ", residual " + fmt("%.2e", sol.report.residual) +
             ", error " + fmt("%.2e", err) + ", " + fmt("%.3f", t) + " s (tol-only stop: " +
             fmt("%.1f", plain.report.iterations) + " iterations, residual " + fmt("%.2e", plain.report.residual) + ")";
  check(o, sol.report.converged, "converged");
  check(o, sol.report.residual <= 1e-10, "residual <= 1e-10");
  check(o, err <= 1e-8, "error <= 1e-8");
  check(o, sol.report.iterations <= 5, "iterations <= 5");
  check(o, t < 1.0, "runtime < 1 s");
  return o;
}

// 2 ---------------------------------------------------------------------------
Outcome optimization_rows() {
  Outcome o;
  const auto ke = known_example();
  SolveOptions opt;  // grad 1e-5, cap 30000
  struct Row {
    Method m;
    double bound;
  };
  for (const Row& r : {Row{Method::SteepestDescent, 1e-4}, Row{Method::ConjugateGradient, 1e-5},
                       Row{Method::TrustRegion, 1e-6}}) {
    Clock c;
    const auto sol = solve(ke.problem, r.m, opt);
    const double t = c.seconds();
    o.detail += std::string(to_string(r.m)) + ": " + fmt("%.0f", sol.report.iterations) + " it, residual " +
                fmt("%.2e", sol.report.residual) + ", " + fmt("%.2f", t) + " s; ";
    check(o, sol.report.residual <= r.bound, std::string(to_string(r.m)) + " residual <= " + fmt("%.0e", r.bound));
    check(o, t < 60.0, std::string(to_string(r.m)) + " < 60 s");
    if (r.m == Method::TrustRegion) check(o, sol.report.iterations <= 30, "tr iterations <= 30");
  }
  return o;
}

// 3 ---------------------------------------------------------------------------
Outcome spd_family() {
  Outcome o;
  const auto opt = krylov_options(1e-9, 1e-8);
  {
    const auto P = random_spd_problem(100, 1);
    Clock c;
    const auto sol = solve(P, Method::KrylovGS, opt);
    const double t = c.seconds();
    o.detail += "n=100 krylov-gs: " + fmt("%.1f", sol.report.iterations) + " it, residual " +
                fmt("%.2e", sol.report.residual) + ", " + fmt("%.2f", t) + " s; ";
    check(o, sol.report.converged && sol.report.residual <= 1e-8, "n=100 residual <= 1e-8");
    check(o, sol.report.iterations <= 10, "n=100 iterations <= 10");
    check(o, t < 5.0, "n=100 < 5 s");
    Clock c2;
    const auto tr = solve(P, Method::TrustRegion, SolveOptions{});
    o.detail += "n=100 tr: " + fmt("%.0f", tr.report.iterations) + " it, residual " + fmt("%.2e", tr.report.residual) +
                ", " + fmt("%.2f", c2.seconds()) + " s; ";
    check(o, tr.report.converged, "tr converged");
    check(o, tr.report.iterations <= 50, "tr iterations <= 50");
  }
  {
    const auto P = random_spd_problem(300, 1);
    Clock c;
    const auto sol = solve(P, Method::KrylovGS, opt);
    o.detail += "n=300 krylov-gs: " + fmt("%.1f", sol.report.iterations) + " it, residual " +
                fmt("%.2e", sol.report.residual) + ", " + fmt("%.2f", c.seconds()) + " s";
    check(o, sol.report.converged, "n=300 converged");
    check(o, sol.report.iterations <= 10, "n=300 iterations <= 10");
  }
  return o;
}

// 4 ---------------------------------------------------------------------------
Outcome nonsymmetric_family() {
  Outcome o;
  Clock g;
  const auto P = random_stable_problem(100, 20, 1, 0.9);
  const double tg = g.seconds();
  Clock c;
  const auto sol = solve(P, Method::KrylovGS, krylov_options(1e-9, 1e-6));
  const double t = c.seconds();
  o.detail = "n=100 N=20: " + fmt("%.1f", sol.report.iterations) + " it, residual " +
             fmt("%.2e", sol.report.residual) + ", " + fmt("%.2f", t) + " s (instance generation " + fmt("%.1f", tg) +
             " s)";
  check(o, sol.report.converged && sol.report.residual <= 1e-6, "residual <= 1e-6");
  check(o, sol.report.iterations <= 15, "iterations <= 15");
  check(o, t < 30.0, "< 30 s");
  return o;
}

// 5 ---------------------------------------------------------------------------
Outcome csma_table() {
  Outcome o;
  Clock c;
  CsmaConfig cfg;
  cfg.nu = 2;
  cfg.tau = 3;
  cfg.p_err_good = 0.03;
  cfg.p_err_stay = 0.75;
  const MatrixXd theta = csma_theta(cfg);
  const double t = c.seconds();
  double worst = 0;
  for (Index r = 0; r < 16; ++r)
    for (Index k = 0; k < 16; ++k) worst = std::max(worst, std::abs(theta(r, k) - kThetaNu2Tau3[r][k]));
  o.detail = "max deviation " + fmt("%.4f", worst) + ", Theta(1,5) = " + fmt("%.4f", theta(0, 4)) +
             ", Theta(7,4) = " + fmt("%.4f", theta(6, 3)) + ", " + fmt("%.4f", t) + " s";
  check(o, theta.rows() == 16 && worst <= 0.005, "all 256 entries within 0.005");
  check(o, std::abs(theta(0, 4) - 0.78) <= 0.005, "Theta(1,5) ~ 0.78");
  check(o, std::abs(theta(6, 3) - 0.65) <= 0.005, "Theta(7,4) ~ 0.65");
  check(o, t < 0.1, "< 0.1 s");
  return o;
}

// 6 ---------------------------------------------------------------------------
Outcome cart_gramian() {
  Outcome o;
  struct Case {
    int nu;
    double max_it, max_t;
  };
  for (const Case& k : {Case{3, 8, 2.0}, Case{5, 25, 30.0}}) {
    CartConfig cfg;
    cfg.nu = k.nu;
    const auto P = observability_problem(cart_system(cfg));
    Clock c;
    const auto sol = solve(P, Method::KrylovGS, krylov_options(1e-9, 1e-9));
    const double t = c.seconds();
    o.detail += "nu=" + std::to_string(k.nu) + " (N=" + std::to_string(P.modes()) + "): " +
                fmt("%.1f", sol.report.iterations) + " it, residual " + fmt("%.2e", sol.report.residual) + ", " +
                fmt("%.2f", t) + " s; ";
    const std::string tag = "nu=" + std::to_string(k.nu);
    check(o, sol.report.converged && sol.report.residual <= 1e-9, tag + " residual <= 1e-9");
    check(o, sol.report.iterations <= k.max_it, tag + " iterations <= " + fmt("%.0f", k.max_it));
    check(o, t < k.max_t, tag + " < " + fmt("%.0f", k.max_t) + " s");
  }
  return o;
}

// 7 ---------------------------------------------------------------------------
Outcome oracle_equivalence() {
  Outcome o;
  Clock c;
  SolveOptions opt;
  opt.fixed_point.tol = 1e-11;
  opt.fixed_point.max_iter = 5000;
  opt.stop.grad_tol = 1e-9;
  const Method methods[] = {Method::Jacobi,          Method::GaussSeidel,       Method::KrylovGS,
                            Method::KrylovJacobi,    Method::SteepestDescent,   Method::ConjugateGradient,
                            Method::TrustRegion,     Method::Direct};
  double worst = 0;
  int cells = 0;
  for (int t = 0; t < 50; ++t) {
    const Index n = 1 + t % 4, N = 1 + (t / 4) % 4;
    const auto P = random_stable_problem(n, N, static_cast<std::uint64_t>(100 + t), 0.3 + 0.6 * ((t * 7) % 10) / 9.0);
    if (!is_ms_stable(P).stable) {
      check(o, false, "instance " + std::to_string(t) + " not MS-stable");
      continue;
    }
    const auto ref = solve_direct(P);
    for (Method m : methods) {
      const auto sol = solve(P, m, opt);
      const double rel = norm(sol.X - ref) / norm(ref);
      worst = std::max(worst, rel);
      ++cells;
      if (!(rel <= 1e-6)) {
        check(o, false, "instance " + std::to_string(t) + " " + std::string(to_string(m)) + " rel " + fmt("%.1e", rel));
      }
    }
  }
  const double t = c.seconds();
  o.detail = std::to_string(cells) + " solver runs, worst relative difference " + fmt("%.2e", worst) + ", " +
             fmt("%.1f", t) + " s" + o.detail;
  check(o, t < 120.0, "< 120 s");
  return o;
}

// 8 ---------------------------------------------------------------------------
Outcome calculus() {
  Outcome o;
  Rng rng(2024);
  double worst_grad = 0, worst_sym = 0, worst_hfd = 0;
  double worst_psd = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 20; ++t) {
    const auto P = oracle::random_small_problem(rng, 1 + t % 4, 1 + t % 3);
    const auto X = oracle::random_tuple(rng, P.n(), P.modes());
    const auto D = oracle::random_tuple(rng, P.n(), P.modes());
    const double exact = dot(gradient(P, X), D);
    const double fd = oracle::central_difference([&P](const SymTuple<double>& Z) { return objective(P, Z); }, X, D,
                                                 1e-6);
    worst_grad = std::max(worst_grad, std::abs(fd - exact) / std::max(std::abs(exact), 1.0));
    const auto Hd = hessian_apply(P, D);
    auto diff = gradient(P, X + D) - gradient(P, X - D);
    diff *= 0.5;
    worst_hfd = std::max(worst_hfd, norm(diff - Hd) / norm(Hd));
  }
  const auto P = oracle::random_small_problem(rng, 3, 3);
  for (int t = 0; t < 100; ++t) {
    const auto xi = oracle::random_tuple(rng, 3, 3), eta = oracle::random_tuple(rng, 3, 3);
    const double a = dot(hessian_apply(P, xi), eta), b = dot(xi, hessian_apply(P, eta));
    worst_sym = std::max(worst_sym, std::abs(a - b) / std::max(std::abs(a), 1.0));
    worst_psd = std::min(worst_psd, dot(hessian_apply(P, xi), xi) / squared_norm(xi));
  }
  o.detail = "gradient vs FD " + fmt("%.1e", worst_grad) + ", Hessian asymmetry " + fmt("%.1e", worst_sym) +
             ", min <H xi, xi>/|xi|^2 " + fmt("%.2e", worst_psd) + ", Hessian vs gradient difference " +
             fmt("%.1e", worst_hfd);
  check(o, worst_grad <= 1e-6, "gradient FD <= 1e-6");
  check(o, worst_sym <= 1e-12, "Hessian symmetry");
  check(o, worst_psd >= -1e-12, "Hessian PSD");
  check(o, worst_hfd <= 1e-10, "Hessian exactness <= 1e-10");
  return o;
}

// 9 ---------------------------------------------------------------------------
Outcome operator_suite() {
  Outcome o;
  Rng rng(99);
  double lin = 0, asym = 0, kron = 0, fixed = 0;
  double psd = std::numeric_limits<double>::infinity();
  auto rel = [](const SymTuple<double>& a, const SymTuple<double>& b) {
    return norm(a - b) / std::max(1e-300, std::max(norm(a), norm(b)));
  };
  for (int t = 0; t < 30; ++t) {
    const Index n = 1 + t % 4, N = 1 + (t / 4) % 4;
    const auto P = oracle::random_small_problem(rng, n, N, 0.3);
    const ShiftedModes<double> M(P);
    const auto X = oracle::random_tuple(rng, n, N), Z = oracle::random_tuple(rng, n, N);
    const double a = rng.normal(), b = rng.normal();
    const auto XZ = a * X + b * Z;
    lin = std::max({lin, rel(apply_LplusPi(P, XZ), a * apply_LplusPi(P, X) + b * apply_LplusPi(P, Z)),
                    rel(apply_T_GS(M, XZ), a * apply_T_GS(M, X) + b * apply_T_GS(M, Z)),
                    rel(apply_T_J(M, XZ), a * apply_T_J(M, X) + b * apply_T_J(M, Z))});
    for (const auto& out : {apply_L(P, X), apply_Pi(P, X), apply_T_GS(M, X), apply_T_J(M, X)}) {
      for (Index i = 0; i < N; ++i) {
        const MatrixXd B = out.block(i);
        if (B.norm() > 0) asym = std::max(asym, (B - B.transpose()).norm() / B.norm());
      }
    }
    const auto W = oracle::random_psd_tuple(rng, n, N);
    const auto PiW = apply_Pi(P, W);
    for (Index i = 0; i < N; ++i) {
      const double lo = Eigen::SelfAdjointEigenSolver<MatrixXd>(MatrixXd(PiW.block(i)), Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
      psd = std::min(psd, lo / norm(W));
    }
    const VectorXd kx = assemble_kron(P) * X.vec();
    kron = std::max(kron, (kx - apply_LplusPi(P, X).vec()).norm() / kx.norm());
    const auto Xs = oracle::solve(P);
    fixed = std::max(fixed, rel(apply_T_GS(M, Xs) + precondition_rhs(M, P.Y()), Xs));
  }
  o.detail = "linearity " + fmt("%.1e", lin) + ", asymmetry " + fmt("%.1e", asym) + ", min eig Pi(PSD)/|X| " +
             fmt("%.1e", psd) + ", Kronecker matvec " + fmt("%.1e", kron) + ", fixed-point identity " +
             fmt("%.1e", fixed);
  check(o, lin <= 1e-13, "linearity");
  check(o, asym <= 1e-13, "symmetry preservation");
  check(o, psd >= -1e-12, "Pi positivity");
  check(o, kron <= 1e-12, "Kronecker consistency <= 1e-12");
  check(o, fixed <= 1e-9, "X* = T_GS(X*) + Yt <= 1e-9");
  return o;
}

// 10 --------------------------------------------------------------------------
Outcome h2_identity() {
  Outcome o;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sys = random_stable_system(2 + seed % 5, 2 + seed % 4, 1 + seed % 2, 1 + seed % 3, seed);
    const auto h = h2_norm(sys);
    worst = std::max(worst, std::abs(h.via_controllability - h.via_observability) / h.via_observability);
  }
  const auto cart = cart_system();
  const auto hc = h2_norm(cart);
  const double cart_rel = std::abs(hc.via_controllability - hc.via_observability) / hc.via_observability;
  o.detail = "random systems worst " + fmt("%.1e", worst) + "; cart (nu=3, stationary mu) " + fmt("%.1e", cart_rel) +
             ", H2 = " + fmt("%.6g", hc.value);
  check(o, worst <= 1e-8, "random systems within 1e-8");
  check(o, cart_rel <= 1e-8, "cart within 1e-8");
  return o;
}

// 11 --------------------------------------------------------------------------
Outcome stability_suite() {
  Outcome o;
  Rng rng(11);
  int agree = 0, total = 0, near = 0, skipped = 0;
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 4, N = 2 + (t / 4) % 3;
    auto P = oracle::random_small_problem(rng, n, N);
    if (t % 25 == 24) {
      std::vector<MatrixXd> A;
      for (Index i = 0; i < N; ++i) A.push_back(P.A().block(i));
      A[0].diagonal().array() += 3.0;
      P = MJLSProblem<double>(ModeTuple<double>::from_blocks(A), P.Y(), P.gamma());
    } else {
      const double r = oracle::rho_TJ(P);
      const double target = t % 2 == 0 ? 0.95 + 0.1 * rng.uniform() : 0.1 + 1.8 * rng.uniform();
      MatrixXd g = P.gamma().off_diagonal() * (target / r);
      g.diagonal() = P.gamma().diagonal();
      P = MJLSProblem<double>(P.A(), P.Y(), CouplingMatrix<double>(g));
      if (t % 2 == 0) ++near;
    }
    const double abscissa = oracle::coupled_abscissa(P);
    if (std::abs(abscissa) < 1e-10) {
      ++skipped;
      continue;
    }
    ++total;
    const auto cert = is_ms_stable(P);
    if (cert.verdict != StabilityVerdict::Indeterminate && cert.stable == (abscissa < 0)) ++agree;
  }
  o.detail = std::to_string(agree) + "/" + std::to_string(total) + " verdicts agree (" + std::to_string(near) +
             " near-critical, " + std::to_string(skipped) + " on the boundary skipped)";
  check(o, agree == total, "all verdicts agree");
  check(o, total >= 190, "at least 190 decided instances");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"known-solution reproduction", known_solution},
      {"optimization rows on the known example", optimization_rows},
      {"random-SPD family", spd_family},
      {"nonsymmetric random family", nonsymmetric_family},
      {"CSMA transition matrix", csma_table},
      {"cart observability Gramian", cart_gramian},
      {"oracle equivalence", oracle_equivalence},
      {"calculus suite", calculus},
      {"operator suite", operator_suite},
      {"H2 trace identity", h2_identity},
      {"stability suite", stability_suite},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
