#include "mjls/bench.hpp"

#include <cstdio>
#include <ostream>

#include "mjls/generators.hpp"
#include "mjls/io.hpp"

namespace mjls {

std::optional<Experiment> parse_experiment(std::string_view s) {
  for (Experiment e : {Experiment::Table1, Experiment::Table2, Experiment::Table3, Experiment::Table6,
                       Experiment::Custom}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::Table1: return "table1";
    case Experiment::Table2: return "table2";
    case Experiment::Table3: return "table3";
    case Experiment::Table6: return "table6";
    case Experiment::Custom: return "custom";
  }
  return "unknown";
}

namespace {

// Guardrails for a single machine: dense n x n Schur work per mode, and the
// cart chain has 2 nu^3 modes of size 2 nu.
constexpr Index kMaxN = 2000;
constexpr Index kMaxModes = 500;
constexpr Index kMaxNu = 10;

}  // namespace

BenchSpec BenchSpec::resolved() const {
  BenchSpec s = *this;
  switch (s.experiment) {
    case Experiment::Table1:
      if (s.methods.empty()) {
        s.methods = {Method::KrylovGS, Method::SteepestDescent, Method::ConjugateGradient, Method::TrustRegion};
      }
      s.sizes = {4};
      s.seeds.clear();
      break;
    case Experiment::Table2:
      if (s.sizes.empty()) s.sizes = {100, 300};
      if (s.methods.empty()) s.methods = {Method::KrylovGS, Method::TrustRegion};
      if (s.seeds.empty()) s.seeds = {1};
      break;
    case Experiment::Table3:
      if (s.sizes.empty()) s.sizes = {100, 200};
      if (s.methods.empty()) s.methods = {Method::KrylovGS};
      if (s.seeds.empty()) s.seeds = {1};
      break;
    case Experiment::Table6:
      if (s.sizes.empty()) s.sizes = {3, 5};
      if (s.methods.empty()) s.methods = {Method::KrylovGS};
      if (!s.options.fixed_point.residual_target) s.options.fixed_point.residual_target = 1e-9;
      s.seeds.clear();
      break;
    case Experiment::Custom:
      if (s.family != "random-spd" && s.family != "random-stable") {
        throw ConfigError("bench: custom family must be random-spd or random-stable");
      }
      if (s.sizes.empty()) throw ConfigError("bench: custom spec needs at least one size");
      if (s.methods.empty()) throw ConfigError("bench: custom spec needs at least one method");
      if (s.seeds.empty()) s.seeds = {1};
      break;
  }
  for (Index n : s.sizes) {
    const Index cap = s.experiment == Experiment::Table6 ? kMaxNu : kMaxN;
    const Index floor = s.experiment == Experiment::Table6 ? 2 : 1;
    if (n < floor || n > cap) {
      throw ConfigError("bench: size " + std::to_string(n) + " outside [" + std::to_string(floor) + ", " +
                        std::to_string(cap) + "]");
    }
  }
  if (s.modes < 1 || s.modes > kMaxModes) throw ConfigError("bench: N outside [1, 500]");
  if (!(s.target_rho > 0.0 && s.target_rho < 1.0)) throw ConfigError("bench: rho must lie in (0, 1)");
  return s;
}

std::string csv_row(const BenchRow& r) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return std::string(buf);
  };
  char iters[32];
  std::snprintf(iters, sizeof iters, "%.1f", r.iterations);
  std::string out(to_string(r.method));
  out += ',' + std::to_string(r.n) + ',' + std::to_string(r.N) + ',';
  if (r.failure) {
    out += ",,,,failed,";
  } else {
    char t[32];
    std::snprintf(t, sizeof t, "%.4f", r.time_s);
    out += std::string(t) + ',' + iters + ',' + num(r.residual) + ',' + (r.error ? num(*r.error) : "") + ',' +
           (r.converged ? "true" : "false") + ',';
  }
  if (r.seed) out += std::to_string(*r.seed);
  return out;
}

namespace {

struct Instance {
  MJLSProblem<double> problem;
  std::optional<SymTuple<double>> reference;
  std::optional<std::uint64_t> seed;
};

BenchRow run_cell(const Instance& inst, Method m, const SolveOptions& opt) {
  BenchRow row;
  row.method = m;
  row.n = inst.problem.n();
  row.N = inst.problem.modes();
  row.seed = inst.seed;
  try {
    // solve() times the solver only; instance construction happens before.
    const auto sol = solve(inst.problem, m, opt);
    row.time_s = sol.report.wall_time_s;
    row.iterations = sol.report.iterations;
    row.residual = sol.report.residual;
    row.converged = sol.report.converged;
    if (inst.reference) row.error = error_norm(sol.X, *inst.reference);
  } catch (const std::exception& e) {
    row.failure = e.what();
  }
  return row;
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchSpec& raw, std::ostream* csv) {
  const BenchSpec spec = raw.resolved();
  std::vector<BenchRow> rows;
  if (csv) *csv << kCsvHeader << '\n';
  auto emit = [&](const Instance& inst) {
    for (Method m : spec.methods) {
      rows.push_back(run_cell(inst, m, spec.options));
      if (csv) {
        *csv << csv_row(rows.back()) << '\n';
        if (rows.back().failure) *csv << "# failed: " << *rows.back().failure << '\n';
        csv->flush();
      }
    }
  };

  switch (spec.experiment) {
    case Experiment::Table1: {
      auto ke = known_example();
      emit({std::move(ke.problem), std::move(ke.solution), std::nullopt});
      break;
    }
    case Experiment::Table6:
      for (Index nu : spec.sizes) {
        CartConfig cfg;
        cfg.nu = static_cast<int>(nu);
        emit({observability_problem(cart_system(cfg)), std::nullopt, std::nullopt});
      }
      break;
    default:
      for (Index n : spec.sizes) {
        for (std::uint64_t seed : spec.seeds) {
          const bool spd = spec.experiment == Experiment::Table2 ||
                           (spec.experiment == Experiment::Custom && spec.family == "random-spd");
          std::optional<Instance> inst;
          try {
            inst = Instance{spd ? random_spd_problem(n, seed)
                                : random_stable_problem(n, spec.modes, seed, spec.target_rho),
                            std::nullopt, seed};
          } catch (const std::exception& e) {
            for (Method m : spec.methods) {
              BenchRow row;
              row.method = m;
              row.n = n;
              row.N = spd ? 2 : spec.modes;
              row.seed = seed;
              row.failure = e.what();
              rows.push_back(row);
              if (csv) *csv << csv_row(row) << '\n' << "# failed: " << e.what() << '\n';
            }
            continue;
          }
          emit(*inst);
        }
      }
      break;
  }
  return rows;
}

}  // namespace mjls
