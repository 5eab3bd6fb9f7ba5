#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mjls/model.hpp"
#include "mjls/solvers.hpp"

namespace mjls {

enum class Experiment { Table1, Table2, Table3, Table6, Custom };

std::optional<Experiment> parse_experiment(std::string_view s);
std::string_view to_string(Experiment e);

/// One benchmark run. Empty vectors mean "use the experiment's defaults":
///   table1  known example, methods krylov-gs sd cg tr
///   table2  random SPD, n in {100, 300}, methods krylov-gs tr
///   table3  random nonsymmetric, n in {100, 200}, N = 20, rho 0.9, krylov-gs
///   table6  cart observability Gramian, nu in {3, 5}, krylov-gs, residual target 1e-9
///   custom  `family` (random-spd | random-stable) over sizes x seeds
struct BenchSpec {
  Experiment experiment = Experiment::Table1;
  std::vector<Index> sizes;  // n, or nu for table6
  std::vector<std::uint64_t> seeds;
  std::vector<Method> methods;
  Index modes = 20;  // N for random-stable instances
  double target_rho = 0.9;
  std::string family = "random-spd";
  SolveOptions options;

  /// Fills defaults and checks guardrails (ConfigError).
  BenchSpec resolved() const;
};

struct BenchRow {
  Method method = Method::KrylovGS;
  Index n = 0;
  Index N = 0;
  double time_s = 0;
  double iterations = 0;
  double residual = 0;
  std::optional<double> error;
  bool converged = false;
  std::optional<std::uint64_t> seed;
  /// Set when the cell threw; the harness carries on.
  std::optional<std::string> failure;
};

inline constexpr const char* kCsvHeader = "method,n,N,time_s,iterations,residual,error,converged,seed";

std::string csv_row(const BenchRow& row);

/// Runs every (instance, method) cell in spec order. Rows are streamed to
/// `csv` (header first) when given.
std::vector<BenchRow> run_bench(const BenchSpec& spec, std::ostream* csv = nullptr);

}  // namespace mjls
