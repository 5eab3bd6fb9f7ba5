// mjls: generate coupled Lyapunov instances, solve them, certify stability,
// and run the benchmark tables.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mjls/bench.hpp"
#include "mjls/generators.hpp"
#include "mjls/io.hpp"
#include "mjls/solvers.hpp"
#include "mjls/stability.hpp"

namespace {

using namespace mjls;

enum Exit : int {
  kOk = 0,
  kNotConverged = 2,
  kUnstable = 3,
  kInputError = 4,
  kNumericalFailure = 5,
};

struct GenerateArgs {
  std::string kind;
  Index n = 10;
  Index N = 4;
  std::uint64_t seed = 1;
  double rho = 0.9;
  int nu = 3;
  int tau = 3;
  double a = 1.0;
  std::string out;
};

struct SolveArgs {
  std::string path;
  std::string method = "krylov-gs";
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<double> residual_target;
  std::string solution_out;
  bool require_stable = false;
  std::string gramian = "obs";
};

struct StabilityArgs {
  std::string path;
  std::string gramian = "obs";
};

struct BenchArgs {
  std::string experiment;
  std::vector<Index> sizes;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  Index N = 20;
  double rho = 0.9;
  std::string family = "random-spd";
  std::optional<double> tol;
  std::optional<double> residual_target;
  std::string out;
};

void print_certificate(std::ostream& os, const StabilityCertificate<double>& c) {
  os << "modewise abscissae:";
  for (double a : c.modewise_abscissae) os << ' ' << format_double(a);
  os << '\n';
  os << "rho(L^-1 Pi): " << format_double(c.rho_LinvPi) << " (" << to_string(c.method)
     << (c.rho_converged ? "" : ", not converged") << ")\n";
  if (c.kronecker_abscissa) os << "kronecker abscissa: " << format_double(*c.kronecker_abscissa) << '\n';
  os << "verdict: " << to_string(c.verdict) << '\n';
}

/// Writes through a file when a path is given, stdout otherwise.
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  fn(f);
  if (!f) throw Error("write to '" + path + "' failed");
}

int cmd_generate(const GenerateArgs& g) {
  // Summary goes to stderr when the file itself goes to stdout.
  std::ostream& info = g.out.empty() || g.out == "-" ? std::cerr : std::cout;
  auto summarize = [&](const MJLSProblem<double>& P) {
    info << "n = " << P.n() << ", N = " << P.modes() << '\n';
    StabilityOptions opt;
    if (P.modes() * P.n() * P.n() > 2000) opt.kronecker_limit = 0;
    print_certificate(info, is_ms_stable(P, opt));
  };

  if (g.kind == "known") {
    const auto ke = known_example();
    with_output(g.out, [&](std::ostream& os) { write_problem(os, ke.problem, ke.solution); });
    summarize(ke.problem);
  } else if (g.kind == "random-spd") {
    const auto P = random_spd_problem(g.n, g.seed);
    with_output(g.out, [&](std::ostream& os) {
      os << "# random-spd n=" << g.n << " seed=" << g.seed << '\n';
      write_problem(os, P);
    });
    summarize(P);
  } else if (g.kind == "random-stable") {
    const auto P = random_stable_problem(g.n, g.N, g.seed, g.rho);
    with_output(g.out, [&](std::ostream& os) {
      os << "# random-stable n=" << g.n << " N=" << g.N << " seed=" << g.seed << " rho=" << g.rho << '\n';
      write_problem(os, P);
    });
    summarize(P);
  } else if (g.kind == "csma") {
    CsmaConfig cfg;
    cfg.nu = g.nu;
    cfg.tau = g.tau;
    cfg.a = g.a;
    const MatrixXd theta = csma_theta(cfg);
    with_output(g.out, [&](std::ostream& os) { write_theta_csv(os, theta, cfg); });
    info << "states = " << cfg.states() << '\n';
  } else if (g.kind == "cart") {
    CartConfig cfg;
    cfg.nu = g.nu;
    cfg.a = g.a;
    const MJLSSystem sys = cart_system(cfg);
    with_output(g.out, [&](std::ostream& os) { write_system(os, sys); });
    StabilityOptions opt;
    opt.kronecker_limit = 0;
    info << "n = " << sys.n() << ", N = " << sys.modes() << '\n';
    print_certificate(info, is_ms_stable(observability_problem(sys), opt));
  } else {
    throw ConfigError("generate: unknown kind '" + g.kind + "'");
  }
  return kOk;
}

struct LoadedProblem {
  MJLSProblem<double> problem;
  std::optional<SymTuple<double>> reference;
};

LoadedProblem load(const std::string& path, const std::string& gramian) {
  if (sniff_file_kind(path) == FileKind::Problem) {
    auto pf = read_problem_file(path);
    return {std::move(pf.problem), std::move(pf.reference)};
  }
  const MJLSSystem sys = read_system_file(path);
  if (gramian == "obs") return {observability_problem(sys), std::nullopt};
  if (gramian == "ctrl") return {controllability_problem(sys), std::nullopt};
  throw ConfigError("--gramian must be obs or ctrl");
}

int cmd_solve(const SolveArgs& a) {
  const auto method = parse_method(a.method);
  if (!method) throw ConfigError("unknown method '" + a.method + "'");
  const LoadedProblem lp = load(a.path, a.gramian);
  const MJLSProblem<double>& P = lp.problem;

  StabilityOptions sopt;
  if (P.modes() * P.n() * P.n() > 2000) sopt.kronecker_limit = 0;
  const auto cert = is_ms_stable(P, sopt);
  if (!cert.stable) {
    std::cerr << "warning: problem is not certified mean-square stable (" << to_string(cert.verdict) << ")\n";
    if (a.require_stable) {
      print_certificate(std::cerr, cert);
      return kUnstable;
    }
  }

  SolveOptions opt;
  if (a.tol) {
    opt.fixed_point.tol = *a.tol;
    opt.stop.grad_tol = *a.tol;
  }
  if (a.max_iter) {
    opt.fixed_point.max_iter = *a.max_iter;
    opt.stop.max_iter = *a.max_iter;
  }
  opt.fixed_point.residual_target = a.residual_target;
  const auto sol = solve(P, *method, opt);

  BenchRow row;
  row.method = *method;
  row.n = P.n();
  row.N = P.modes();
  row.time_s = sol.report.wall_time_s;
  row.iterations = sol.report.iterations;
  row.residual = sol.report.residual;
  row.converged = sol.report.converged;
  if (lp.reference) row.error = error_norm(sol.X, *lp.reference);
  std::cout << kCsvHeader << '\n' << csv_row(row) << '\n';

  if (!a.solution_out.empty()) {
    with_output(a.solution_out, [&](std::ostream& os) { write_solution(os, sol.X); });
  }
  return sol.report.converged ? kOk : kNotConverged;
}

int cmd_stability(const StabilityArgs& a) {
  const LoadedProblem lp = load(a.path, a.gramian);
  StabilityOptions opt;
  if (lp.problem.modes() * lp.problem.n() * lp.problem.n() > 2000) opt.kronecker_limit = 0;
  const auto cert = is_ms_stable(lp.problem, opt);
  print_certificate(std::cout, cert);
  return cert.stable ? kOk : kUnstable;
}

int cmd_bench(const BenchArgs& a) {
  const auto exp = parse_experiment(a.experiment);
  if (!exp) throw ConfigError("unknown experiment '" + a.experiment + "'");
  BenchSpec spec;
  spec.experiment = *exp;
  spec.sizes = a.sizes;
  spec.seeds = a.seeds;
  for (const auto& m : a.methods) {
    const auto parsed = parse_method(m);
    if (!parsed) throw ConfigError("unknown method '" + m + "'");
    spec.methods.push_back(*parsed);
  }
  spec.modes = a.N;
  spec.target_rho = a.rho;
  spec.family = a.family;
  if (a.tol) {
    spec.options.fixed_point.tol = *a.tol;
    spec.options.stop.grad_tol = *a.tol;
  }
  if (a.residual_target) spec.options.fixed_point.residual_target = a.residual_target;
  std::vector<BenchRow> rows;
  with_output(a.out, [&](std::ostream& os) { rows = run_bench(spec, &os); });
  for (const auto& r : rows) {
    if (r.failure || !r.converged) return kNotConverged;
  }
  return kOk;
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const StabilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnstable;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const ConfigError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const InvariantError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const SizeGuardError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const BreakdownError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const LineSearchError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const SingularError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const Error& e) {
    // Remaining library errors are I/O (unreadable or unwritable files).
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled Lyapunov equations of Markov jump linear systems"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a problem, system or transition matrix");
  g->add_option("kind", gen.kind, "known | random-spd | random-stable | csma | cart")
      ->required()
      ->check(CLI::IsMember({"known", "random-spd", "random-stable", "csma", "cart"}));
  g->add_option("--n", gen.n, "Matrix size")->check(CLI::Range(1, 5000));
  g->add_option("--N", gen.N, "Number of modes (random-stable)")->check(CLI::Range(1, 1000));
  g->add_option("--seed", gen.seed, "PRNG seed");
  g->add_option("--rho", gen.rho, "Target rho(L^-1 Pi) (random-stable)");
  g->add_option("--nu", gen.nu, "Stations / carts")->check(CLI::Range(2, 20));
  g->add_option("--tau", gen.tau, "Memory length (csma)")->check(CLI::Range(1, 8));
  g->add_option("--a", gen.a, "Rate scaling in Gamma = a (Theta - I)");
  g->add_option("-o,--out", gen.out, "Output path (default stdout)");

  SolveArgs sol;
  auto* s = app.add_subcommand("solve", "Solve a problem file and print a CSV report row");
  s->add_option("file", sol.path, "Problem or system file")->required();
  s->add_option("-m,--method", sol.method,
                "jacobi | gauss-seidel | krylov-gs | krylov-jacobi | sd | cg | tr | direct");
  s->add_option("--tol", sol.tol, "Tolerance (default 1e-9, or gradient 1e-5 for sd/cg/tr)");
  s->add_option("--max-iter", sol.max_iter, "Iteration cap");
  s->add_option("--residual-target", sol.residual_target,
                "Also require residual_norm <= this before a fixed-point/Krylov run counts as converged");
  s->add_option("--solution", sol.solution_out, "Write the solution blocks here");
  s->add_flag("--require-stable", sol.require_stable, "Refuse problems that are not certified stable");
  s->add_option("--gramian", sol.gramian, "obs | ctrl, for system files")->check(CLI::IsMember({"obs", "ctrl"}));

  StabilityArgs st;
  auto* t = app.add_subcommand("stability", "Mean-square stability certificate");
  t->add_option("file", st.path, "Problem or system file")->required();
  t->add_option("--gramian", st.gramian, "obs | ctrl, for system files")->check(CLI::IsMember({"obs", "ctrl"}));

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Run a benchmark table and print CSV");
  b->add_option("experiment", be.experiment, "table1 | table2 | table3 | table6 | custom")
      ->required()
      ->check(CLI::IsMember({"table1", "table2", "table3", "table6", "custom"}));
  b->add_option("--sizes", be.sizes, "Matrix sizes (nu for table6)");
  b->add_option("--seeds", be.seeds, "PRNG seeds");
  b->add_option("--methods", be.methods, "Methods to run");
  b->add_option("--N", be.N, "Modes for random-stable instances");
  b->add_option("--rho", be.rho, "Target rho for random-stable instances");
  b->add_option("--family", be.family, "random-spd | random-stable (custom)");
  b->add_option("--tol", be.tol, "Tolerance override");
  b->add_option("--residual-target", be.residual_target, "Absolute residual bound for fixed-point/Krylov rows");
  b->add_option("-o,--out", be.out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  if (*g) return run_guarded([&] { return cmd_generate(gen); });
  if (*s) return run_guarded([&] { return cmd_solve(sol); });
  if (*t) return run_guarded([&] { return cmd_stability(st); });
  return run_guarded([&] { return cmd_bench(be); });
}
