#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "mjls/generators.hpp"
#include "mjls/model.hpp"

namespace mjls {

// Plain-text block format, whitespace separated, '#' to end of line is a comment.
//
//   MJLS n N [rate]
//   <N rows of Gamma>
//   A 1            Y 1            [X 1]   ... per mode, n rows each
//
//   MJLS-SYSTEM n N m p [rate]
//   <N rows of Gamma>
//   A i / B i / C i blocks per mode (n x n, n x m, p x n)
//   MU <N values>
//
// `rate` marks a rate matrix (rows sum to zero, zero diagonal allowed).
// Optional `X i` blocks carry a reference solution. Values are written with
// 17 significant digits, so write -> read is exact.

struct ProblemFile {
  MJLSProblem<double> problem;
  std::optional<SymTuple<double>> reference;
};

enum class FileKind { Problem, System };

/// Looks at the first header token only.
FileKind sniff_file_kind(std::istream& in);
FileKind sniff_file_kind(const std::string& path);

ProblemFile read_problem(std::istream& in);
ProblemFile read_problem_file(const std::string& path);
void write_problem(std::ostream& out, const MJLSProblem<double>& P,
                   const std::optional<SymTuple<double>>& reference = std::nullopt);
void write_problem_file(const std::string& path, const MJLSProblem<double>& P,
                        const std::optional<SymTuple<double>>& reference = std::nullopt);

MJLSSystem read_system(std::istream& in);
MJLSSystem read_system_file(const std::string& path);
void write_system(std::ostream& out, const MJLSSystem& sys);
void write_system_file(const std::string& path, const MJLSSystem& sys);

/// Solution tuple as `X i` blocks.
void write_solution(std::ostream& out, const SymTuple<double>& X);

/// Theta with a header row and a first column of state labels (e.g. 0BAA).
void write_theta_csv(std::ostream& out, const MatrixXd& theta, const CsmaConfig& cfg);

/// %.17g: enough digits for an exact round trip.
std::string format_double(double v);

}  // namespace mjls
