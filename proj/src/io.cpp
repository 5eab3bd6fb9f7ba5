#include "mjls/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace mjls {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

/// Line-oriented tokenizer that remembers where each line came from.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next non-empty line split into tokens; false at end of input.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      tokens.clear();
      for (std::string t; ss >> t;) tokens.push_back(std::move(t));
      if (!tokens.empty()) return true;
    }
    return false;
  }

  std::vector<std::string> expect(const char* what) {
    std::vector<std::string> t;
    if (!next(t)) fail(std::string("unexpected end of input, expected ") + what);
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_no_, msg); }

  double number(const std::string& tok) const {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) fail("invalid number '" + tok + "'");
    return v;
  }

  Index integer(const std::string& tok, const char* what) const {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 1) {
      fail(std::string("invalid ") + what + " '" + tok + "'");
    }
    return static_cast<Index>(v);
  }

  MatrixXd rows(Index r, Index c, const char* what) {
    MatrixXd M(r, c);
    for (Index i = 0; i < r; ++i) {
      const auto t = expect(what);
      if (static_cast<Index>(t.size()) != c) {
        fail(std::string(what) + ": expected " + std::to_string(c) + " values, got " + std::to_string(t.size()));
      }
      for (Index j = 0; j < c; ++j) M(i, j) = number(t[static_cast<std::size_t>(j)]);
    }
    return M;
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

CouplingKind parse_kind(Reader& r, const std::vector<std::string>& head, std::size_t pos) {
  if (head.size() == pos) return CouplingKind::General;
  if (head.size() == pos + 1 && head[pos] == "rate") return CouplingKind::RateMatrix;
  r.fail("unexpected header token '" + head.back() + "'");
}

void write_matrix(std::ostream& out, const Eigen::Ref<const MatrixXd>& M) {
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) out << (j ? " " : "") << format_double(M(i, j));
    out << '\n';
  }
}

/// Parses a section header like "A 3" and returns the 0-based mode.
Index section(Reader& r, const std::vector<std::string>& t, const std::string& tag, Index modes) {
  if (t.size() != 2 || t[0] != tag) r.fail("expected section '" + tag + " i'");
  const Index i = r.integer(t[1], "mode index");
  if (i > modes) r.fail("mode index " + t[1] + " exceeds N = " + std::to_string(modes));
  return i - 1;
}

template <typename Build>
auto rethrow_at(Reader& r, Build&& build) {
  try {
    return build();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    r.fail(e.what());
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for reading");
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  return f;
}

}  // namespace

FileKind sniff_file_kind(std::istream& in) {
  Reader r(in);
  std::vector<std::string> t;
  if (!r.next(t)) r.fail("empty input");
  if (t[0] == "MJLS") return FileKind::Problem;
  if (t[0] == "MJLS-SYSTEM") return FileKind::System;
  r.fail("unknown header '" + t[0] + "'");
}

FileKind sniff_file_kind(const std::string& path) {
  auto f = open_in(path);
  return sniff_file_kind(f);
}

ProblemFile read_problem(std::istream& in) {
  Reader r(in);
  const auto head = r.expect("header");
  if (head[0] != "MJLS") r.fail("expected header 'MJLS n N'");
  if (head.size() < 3) r.fail("header needs n and N");
  const Index n = r.integer(head[1], "n");
  const Index N = r.integer(head[2], "N");
  const CouplingKind kind = parse_kind(r, head, 3);
  const MatrixXd G = r.rows(N, N, "Gamma row");
  auto gamma = rethrow_at(r, [&] { return CouplingMatrix<double>(G, kind); });

  std::vector<MatrixXd> A(static_cast<std::size_t>(N)), Y(A.size()), X(A.size());
  std::vector<bool> seenA(A.size()), seenY(A.size()), seenX(A.size());
  std::vector<std::string> t;
  while (r.next(t)) {
    if (t.size() != 2 || (t[0] != "A" && t[0] != "Y" && t[0] != "X")) {
      r.fail("expected section 'A i', 'Y i' or 'X i'");
    }
    const auto i = static_cast<std::size_t>(section(r, t, t[0], N));
    auto& seen = t[0] == "A" ? seenA : t[0] == "Y" ? seenY : seenX;
    if (seen[i]) r.fail("duplicate section '" + t[0] + " " + t[1] + "'");
    seen[i] = true;
    MatrixXd M = r.rows(n, n, t[0] == "A" ? "A row" : t[0] == "Y" ? "Y row" : "X row");
    (t[0] == "A" ? A : t[0] == "Y" ? Y : X)[i] = std::move(M);
  }
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (!seenA[i] || !seenY[i]) r.fail("missing A or Y block for mode " + std::to_string(i + 1));
  }
  const bool anyX = std::find(seenX.begin(), seenX.end(), true) != seenX.end();
  const bool allX = std::find(seenX.begin(), seenX.end(), false) == seenX.end();
  if (anyX && !allX) r.fail("reference solution must list every X block");

  return rethrow_at(r, [&] {
    ProblemFile pf{MJLSProblem<double>(ModeTuple<double>::from_blocks(A), SymTuple<double>::from_blocks(Y),
                                       std::move(gamma)),
                   std::nullopt};
    if (allX) pf.reference = SymTuple<double>::from_blocks(X);
    return pf;
  });
}

ProblemFile read_problem_file(const std::string& path) {
  auto f = open_in(path);
  return read_problem(f);
}

void write_problem(std::ostream& out, const MJLSProblem<double>& P, const std::optional<SymTuple<double>>& reference) {
  out << "MJLS " << P.n() << ' ' << P.modes();
  if (P.gamma().kind() == CouplingKind::RateMatrix) out << " rate";
  out << '\n';
  write_matrix(out, P.gamma().matrix());
  for (Index i = 0; i < P.modes(); ++i) {
    out << "A " << i + 1 << '\n';
    write_matrix(out, P.A().block(i));
    out << "Y " << i + 1 << '\n';
    write_matrix(out, P.Y().block(i));
  }
  if (reference) write_solution(out, *reference);
}

void write_problem_file(const std::string& path, const MJLSProblem<double>& P,
                        const std::optional<SymTuple<double>>& reference) {
  auto f = open_out(path);
  write_problem(f, P, reference);
  if (!f) throw Error("write to '" + path + "' failed");
}

void write_solution(std::ostream& out, const SymTuple<double>& X) {
  for (Index i = 0; i < X.modes(); ++i) {
    out << "X " << i + 1 << '\n';
    write_matrix(out, X.block(i));
  }
}

MJLSSystem read_system(std::istream& in) {
  Reader r(in);
  const auto head = r.expect("header");
  if (head[0] != "MJLS-SYSTEM") r.fail("expected header 'MJLS-SYSTEM n N m p'");
  if (head.size() < 5) r.fail("header needs n, N, m and p");
  const Index n = r.integer(head[1], "n");
  const Index N = r.integer(head[2], "N");
  const Index m = r.integer(head[3], "m");
  const Index p = r.integer(head[4], "p");
  const CouplingKind kind = parse_kind(r, head, 5);
  const MatrixXd G = r.rows(N, N, "Gamma row");
  auto gamma = rethrow_at(r, [&] { return CouplingMatrix<double>(G, kind); });

  std::vector<MatrixXd> A(static_cast<std::size_t>(N)), B(A.size()), C(A.size());
  std::vector<bool> seenA(A.size()), seenB(A.size()), seenC(A.size());
  std::optional<VectorXd> mu;
  std::vector<std::string> t;
  while (r.next(t)) {
    if (t[0] == "MU") {
      if (mu) r.fail("duplicate MU line");
      if (static_cast<Index>(t.size()) != N + 1) r.fail("MU needs " + std::to_string(N) + " values");
      mu = VectorXd(N);
      for (Index i = 0; i < N; ++i) (*mu)(i) = r.number(t[static_cast<std::size_t>(i + 1)]);
      continue;
    }
    if (t.size() != 2 || (t[0] != "A" && t[0] != "B" && t[0] != "C")) {
      r.fail("expected section 'A i', 'B i', 'C i' or 'MU'");
    }
    const auto i = static_cast<std::size_t>(section(r, t, t[0], N));
    auto& seen = t[0] == "A" ? seenA : t[0] == "B" ? seenB : seenC;
    if (seen[i]) r.fail("duplicate section '" + t[0] + " " + t[1] + "'");
    seen[i] = true;
    if (t[0] == "A") A[i] = r.rows(n, n, "A row");
    if (t[0] == "B") B[i] = r.rows(n, m, "B row");
    if (t[0] == "C") C[i] = r.rows(p, n, "C row");
  }
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (!seenA[i] || !seenB[i] || !seenC[i]) r.fail("missing A, B or C block for mode " + std::to_string(i + 1));
  }
  if (!mu) r.fail("missing MU line");
  return rethrow_at(r, [&] {
    MJLSSystem sys{ModeTuple<double>::from_blocks(A), ModeTuple<double>::from_blocks(B),
                   ModeTuple<double>::from_blocks(C), std::move(gamma), *mu};
    sys.validate();
    return sys;
  });
}

MJLSSystem read_system_file(const std::string& path) {
  auto f = open_in(path);
  return read_system(f);
}

void write_system(std::ostream& out, const MJLSSystem& sys) {
  out << "MJLS-SYSTEM " << sys.n() << ' ' << sys.modes() << ' ' << sys.B.cols() << ' ' << sys.C.rows();
  if (sys.gamma.kind() == CouplingKind::RateMatrix) out << " rate";
  out << '\n';
  write_matrix(out, sys.gamma.matrix());
  for (Index i = 0; i < sys.modes(); ++i) {
    out << "A " << i + 1 << '\n';
    write_matrix(out, sys.A.block(i));
    out << "B " << i + 1 << '\n';
    write_matrix(out, sys.B.block(i));
    out << "C " << i + 1 << '\n';
    write_matrix(out, sys.C.block(i));
  }
  out << "MU";
  for (Index i = 0; i < sys.modes(); ++i) out << ' ' << format_double(sys.mu(i));
  out << '\n';
}

void write_system_file(const std::string& path, const MJLSSystem& sys) {
  auto f = open_out(path);
  write_system(f, sys);
  if (!f) throw Error("write to '" + path + "' failed");
}

void write_theta_csv(std::ostream& out, const MatrixXd& theta, const CsmaConfig& cfg) {
  if (theta.rows() != cfg.states() || theta.cols() != cfg.states()) {
    throw DimensionError("write_theta_csv: theta does not match the configuration");
  }
  out << "state";
  for (Index j = 0; j < theta.cols(); ++j) out << ',' << csma_label(cfg, j);
  out << '\n';
  for (Index i = 0; i < theta.rows(); ++i) {
    out << csma_label(cfg, i);
    for (Index j = 0; j < theta.cols(); ++j) out << ',' << format_double(theta(i, j));
    out << '\n';
  }
}

}  // namespace mjls
