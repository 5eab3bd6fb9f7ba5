#include "mjls/generators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <numbers>

#include "mjls/fixedpoint.hpp"
#include "mjls/operators.hpp"

namespace mjls {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 == 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

MatrixXd Rng::normal_matrix(Index rows, Index cols) {
  MatrixXd M(rows, cols);
  // Row-major fill so the draw order reads like the printed matrix.
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) M(r, c) = normal();
  return M;
}

KnownExample known_example() {
  MatrixXd A1(4, 4), A2(4, 4), X2(4, 4), Y1(4, 4), Y2(4, 4), G(2, 2);
  A1 << -6, 4, -7, 6,
        8, -4, -10, 10,
        14, 6, 1, 7,
        -21, -10, -6, -13;
  A2 << -16, 4, 7, -1,
        5, -17, -8, -2,
        -2, 3, -19, -4,
        4, 10, 25, -9;
  X2 << 2, 1, -1, -2,
        1, 1, 0, -1,
        -1, 0, 1, 1,
        -2, -1, 1, 2;
  Y1 << 5, -1, -23, 56,
        -1, -8, -31, 48,
        -23, -31, -56, 22,
        56, 48, 22, 99;
  Y2 << 68, 6, -52, -50,
        6, 20, 8, -22,
        -52, 8, 42, 14,
        -50, -22, 14, 24;
  G << -1, 1,
       2, -2;
  const MatrixXd X1 = MatrixXd::Ones(4, 4);
  MJLSProblem<double> P(ModeTuple<double>::from_blocks({A1, A2}), SymTuple<double>::from_blocks({Y1, Y2}),
                        CouplingMatrix<double>(G));
  return {std::move(P), SymTuple<double>::from_blocks({X1, X2})};
}

MJLSProblem<double> random_spd_problem(Index n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("random_spd_problem: n must be positive");
  Rng rng(seed);
  const double dn = static_cast<double>(n);
  std::vector<MatrixXd> A, Y;
  for (int i = 0; i < 2; ++i) {
    const MatrixXd M = rng.normal_matrix(n, n);
    MatrixXd Ai = -(M * M.transpose() / dn + MatrixXd::Identity(n, n));
    A.push_back(symmetric_part(Ai));
  }
  for (int i = 0; i < 2; ++i) {
    const MatrixXd W = rng.normal_matrix(n, n);
    MatrixXd Yi = W * W.transpose() / dn + 0.1 * MatrixXd::Identity(n, n);
    Y.push_back(symmetric_part(Yi));
  }
  MatrixXd G(2, 2);
  G << -0.3, 0.3,
       0.5, -0.5;
  return {ModeTuple<double>::from_blocks(A), SymTuple<double>::from_blocks(Y),
          CouplingMatrix<double>(G, CouplingKind::RateMatrix)};
}

MJLSProblem<double> random_stable_problem(Index n, Index N, std::uint64_t seed, double target_rho) {
  if (n < 1 || N < 1) throw ConfigError("random_stable_problem: n and N must be positive");
  if (!(target_rho > 0.0 && target_rho < 1.0)) {
    throw ConfigError("random_stable_problem: target rho must lie in (0, 1)");
  }
  Rng rng(seed);
  const double sn = std::sqrt(static_cast<double>(n));
  std::vector<MatrixXd> A, Y;
  for (Index i = 0; i < N; ++i) {
    MatrixXd M = rng.normal_matrix(n, n) / sn;
    const double alpha = spectral_abscissa(M);
    M.diagonal().array() -= alpha + 1.0;
    A.push_back(std::move(M));
  }
  MatrixXd G(N, N);
  for (Index i = 0; i < N; ++i) {
    double row = 0.0;
    for (Index j = 0; j < N; ++j) {
      if (i == j) continue;
      G(i, j) = rng.uniform();
      row += G(i, j);
    }
    G(i, i) = row > 0.0 ? -row : -1.0;
  }
  for (Index i = 0; i < N; ++i) {
    const MatrixXd W = rng.normal_matrix(n, n);
    MatrixXd Yi = W * W.transpose() / static_cast<double>(n);
    Y.push_back(symmetric_part(Yi));
  }
  MJLSProblem<double> P(ModeTuple<double>::from_blocks(A), SymTuple<double>::from_blocks(Y),
                        CouplingMatrix<double>(G));
  auto scaled = scale_coupling(P, target_rho);
  if (!(scaled.rho < 1.0)) {
    throw StabilityError("random_stable_problem: scaled coupling is not MS-stable");
  }
  return std::move(scaled.problem);
}

// ---------------------------------------------------------------------------
// CSMA/CA sender chain

void CsmaConfig::validate() const {
  if (nu < 2) throw ConfigError("CsmaConfig: nu must be at least 2");
  if (tau < 1) throw ConfigError("CsmaConfig: tau must be at least 1");
  if (!(p_err_good > 0.0 && p_err_good < 1.0)) throw ConfigError("CsmaConfig: p_err_good must lie in (0, 1)");
  if (!(p_err_stay > 0.0 && p_err_stay < 1.0)) throw ConfigError("CsmaConfig: p_err_stay must lie in (0, 1)");
  if (!(a > 0.0)) throw ConfigError("CsmaConfig: a must be positive");
  if (std::pow(static_cast<double>(nu), tau) > 1e6) throw SizeGuardError("CsmaConfig: nu^tau exceeds 1e6 states");
}

Index CsmaConfig::states() const {
  Index s = 1;
  for (int k = 0; k < tau; ++k) s *= nu;
  return 2 * s;
}

CsmaState csma_decode(const CsmaConfig& cfg, Index state) {
  const Index half = cfg.states() / 2;
  if (state < 0 || state >= 2 * half) throw DimensionError("csma_decode: state out of range");
  CsmaState s;
  s.e = state >= half ? 1 : 0;
  Index rest = state % half;
  s.memory.assign(static_cast<std::size_t>(cfg.tau), 0);
  for (int k = cfg.tau - 1; k >= 0; --k) {
    s.memory[static_cast<std::size_t>(k)] = static_cast<int>(rest % cfg.nu);
    rest /= cfg.nu;
  }
  return s;
}

Index csma_encode(const CsmaConfig& cfg, const CsmaState& s) {
  Index idx = 0;
  for (int digit : s.memory) idx = idx * cfg.nu + digit;
  return s.e * (cfg.states() / 2) + idx;
}

std::string csma_label(const CsmaConfig& cfg, Index state) {
  const CsmaState s = csma_decode(cfg, state);
  std::string out(1, static_cast<char>('0' + s.e));
  for (int d : s.memory) out += static_cast<char>('A' + d);
  return out;
}

std::vector<double> csma_sender_probabilities(const CsmaConfig& cfg, const std::vector<int>& memory) {
  if (static_cast<int>(memory.size()) != cfg.tau) throw DimensionError("csma_sender_probabilities: memory length != tau");
  // first[k] = 1-based position of station k's most recent transmission, 0 if absent.
  std::vector<int> first(static_cast<std::size_t>(cfg.nu), 0);
  for (int pos = cfg.tau; pos >= 1; --pos) first[static_cast<std::size_t>(memory[pos - 1])] = pos;
  const auto weight = [&](int pos) { return 1.0 / (cfg.tau + 1 - (pos - 1)); };
  double denom = 0.0;
  for (int f : first) denom += f == 0 ? 1.0 : weight(f);
  const double w_bar = 1.0 / denom;
  std::vector<double> p(first.size());
  for (std::size_t k = 0; k < first.size(); ++k) p[k] = first[k] == 0 ? w_bar : w_bar * weight(first[k]);
  return p;
}

MatrixXd csma_theta(const CsmaConfig& cfg) {
  cfg.validate();
  const Index S = cfg.states();
  MatrixXd theta = MatrixXd::Zero(S, S);
  for (Index row = 0; row < S; ++row) {
    const CsmaState cur = csma_decode(cfg, row);
    CsmaState next;
    next.memory.resize(cur.memory.size());
    if (cur.e == 0) {
      const auto p = csma_sender_probabilities(cfg, cur.memory);
      for (int k = 0; k < cfg.nu; ++k) {
        next.memory[0] = k;
        std::copy(cur.memory.begin(), cur.memory.end() - 1, next.memory.begin() + 1);
        next.e = 0;
        theta(row, csma_encode(cfg, next)) += p[static_cast<std::size_t>(k)] * (1.0 - cfg.p_err_good);
        next.e = 1;
        theta(row, csma_encode(cfg, next)) += p[static_cast<std::size_t>(k)] * cfg.p_err_good;
      }
    } else {
      // The failed sender goes again: its id is pushed once more.
      next.memory[0] = cur.memory[0];
      std::copy(cur.memory.begin(), cur.memory.end() - 1, next.memory.begin() + 1);
      next.e = 0;
      theta(row, csma_encode(cfg, next)) += 1.0 - cfg.p_err_stay;
      next.e = 1;
      theta(row, csma_encode(cfg, next)) += cfg.p_err_stay;
    }
  }
  return theta;
}

CouplingMatrix<double> csma_rate(const MatrixXd& theta, double a) {
  if (!(a > 0.0)) throw ConfigError("csma_rate: a must be positive");
  if (theta.rows() != theta.cols() || theta.rows() < 1) throw DimensionError("csma_rate: theta must be square");
  for (Index i = 0; i < theta.rows(); ++i) {
    if ((theta.row(i).array() < 0.0).any() || std::abs(theta.row(i).sum() - 1.0) > 1e-12) {
      throw InvariantError("csma_rate: row " + std::to_string(i + 1) + " of theta is not a probability vector");
    }
  }
  MatrixXd G = a * (theta - MatrixXd::Identity(theta.rows(), theta.cols()));
  // Make each row sum to zero exactly (absorbs rounding in the diagonal).
  for (Index i = 0; i < G.rows(); ++i) G(i, i) = -(G.row(i).sum() - G(i, i));
  return CouplingMatrix<double>(std::move(G), CouplingKind::RateMatrix);
}

VectorXd stationary_distribution(const MatrixXd& theta) {
  const Index N = theta.rows();
  if (N < 1 || theta.cols() != N) throw DimensionError("stationary_distribution: theta must be square");
  MatrixXd M = theta.transpose() - MatrixXd::Identity(N, N);
  M.row(N - 1).setOnes();
  VectorXd rhs = VectorXd::Zero(N);
  rhs(N - 1) = 1.0;
  const Eigen::FullPivLU<MatrixXd> lu(M);
  if (!lu.isInvertible()) throw SingularError("stationary_distribution: chain is not irreducible");
  VectorXd mu = lu.solve(rhs);
  for (Index i = 0; i < N; ++i) {
    if (mu(i) < -1e-12) throw InvariantError("stationary_distribution: negative component");
    mu(i) = std::max(mu(i), 0.0);
  }
  return mu / mu.sum();
}

// ---------------------------------------------------------------------------
// Systems

void MJLSSystem::validate() const {
  const Index N = A.modes();
  if (A.rows() != A.cols()) throw DimensionError("MJLSSystem: A_i must be square");
  if (B.modes() != N || C.modes() != N || gamma.size() != N || mu.size() != N) {
    throw DimensionError("MJLSSystem: mode counts differ");
  }
  if (B.rows() != A.rows() || C.cols() != A.rows()) throw DimensionError("MJLSSystem: B_i or C_i has wrong size");
  if ((mu.array() < 0.0).any() || std::abs(mu.sum() - 1.0) > 1e-12) {
    throw InvariantError("MJLSSystem: mu is not a probability vector");
  }
}

MJLSSystem cart_system(const CartConfig& cfg) {
  if (!(cfg.m > 0.0 && cfg.g > 0.0 && cfg.R > 0.0 && cfg.stiffness_factor > 0.0)) {
    throw ConfigError("cart_system: physical constants must be positive");
  }
  CsmaConfig cs;
  cs.nu = cfg.nu;
  cs.tau = 3;
  cs.a = cfg.a;
  cs.validate();
  const MatrixXd theta = csma_theta(cs);
  const Index N = cs.states(), nu = cfg.nu, n = 2 * nu;

  MatrixXd A = MatrixXd::Zero(n, n), B = MatrixXd::Zero(n, nu);
  for (Index k = 0; k < nu; ++k) {
    A(2 * k, 2 * k + 1) = 1.0;
    A(2 * k + 1, 2 * k) = -cfg.stiffness_factor * cfg.m * cfg.g;
    A(2 * k + 1, 2 * k + 1) = -cfg.R;
    B(2 * k + 1, k) = 1.0;
  }
  std::vector<MatrixXd> Cs;
  for (Index i = 0; i < N; ++i) {
    const CsmaState s = csma_decode(cs, i);
    MatrixXd C = MatrixXd::Zero(2, n);
    if (s.e == 0) C.block(0, 2 * s.memory[0], 2, 2).setIdentity();
    Cs.push_back(std::move(C));
  }
  MJLSSystem sys{ModeTuple<double>::constant(A, N), ModeTuple<double>::constant(B, N),
                 ModeTuple<double>::from_blocks(Cs), csma_rate(theta, cfg.a), stationary_distribution(theta)};
  sys.validate();
  return sys;
}

MJLSSystem random_stable_system(Index n, Index N, Index m, Index p, std::uint64_t seed) {
  if (n < 1 || N < 1 || m < 1 || p < 1) throw ConfigError("random_stable_system: sizes must be positive");
  Rng rng(seed);
  const double sn = std::sqrt(static_cast<double>(n));
  std::vector<MatrixXd> A, B, C;
  for (Index i = 0; i < N; ++i) {
    MatrixXd M = rng.normal_matrix(n, n) / sn;
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetric_part(M), Eigen::EigenvaluesOnly);
    M.diagonal().array() -= es.eigenvalues().maxCoeff() + 0.5;
    A.push_back(std::move(M));
    B.push_back(rng.normal_matrix(n, m));
    C.push_back(rng.normal_matrix(p, n));
  }
  MatrixXd G = MatrixXd::Zero(N, N);
  for (Index i = 0; i < N; ++i) {
    for (Index j = 0; j < N; ++j)
      if (i != j) G(i, j) = rng.uniform();
    G(i, i) = -(G.row(i).sum());
  }
  VectorXd mu(N);
  for (Index i = 0; i < N; ++i) mu(i) = 0.1 + rng.uniform();
  mu /= mu.sum();
  MJLSSystem sys{ModeTuple<double>::from_blocks(A), ModeTuple<double>::from_blocks(B),
                 ModeTuple<double>::from_blocks(C), CouplingMatrix<double>(G, CouplingKind::RateMatrix), mu};
  sys.validate();
  return sys;
}

MJLSProblem<double> observability_problem(const MJLSSystem& sys) {
  sys.validate();
  std::vector<MatrixXd> At, Y;
  for (Index i = 0; i < sys.modes(); ++i) {
    At.push_back(sys.A.block(i).transpose());
    Y.push_back(sys.C.block(i).transpose() * sys.C.block(i));
  }
  return {ModeTuple<double>::from_blocks(At), SymTuple<double>::from_blocks(Y, Symmetrize::Yes), sys.gamma};
}

MJLSProblem<double> controllability_problem(const MJLSSystem& sys) {
  sys.validate();
  std::vector<MatrixXd> A, Y;
  for (Index i = 0; i < sys.modes(); ++i) {
    A.push_back(sys.A.block(i));
    Y.push_back(sys.mu(i) * sys.B.block(i) * sys.B.block(i).transpose());
  }
  const MatrixXd Gt = sys.gamma.matrix().transpose();
  bool zero_rows = true;
  for (Index i = 0; i < Gt.rows(); ++i) {
    zero_rows = zero_rows && std::abs(Gt.row(i).sum()) <= 1e-12 * std::max(1.0, Gt.row(i).cwiseAbs().sum());
  }
  const CouplingKind kind = zero_rows ? CouplingKind::RateMatrix : CouplingKind::General;
  return {ModeTuple<double>::from_blocks(A), SymTuple<double>::from_blocks(Y, Symmetrize::Yes),
          CouplingMatrix<double>(Gt, kind)};
}

namespace {

SymTuple<double> solve_gramian(const MJLSProblem<double>& P, const GramianOptions& opt) {
  if (P.modes() * P.n() * P.n() <= opt.direct_limit) return solve_direct(P);
  FixedPointConfig cfg;
  cfg.tol = opt.tol;
  cfg.max_iter = opt.max_iter;
  auto sol = solve_krylov_gs(P, cfg);
  const double scale = std::max(1.0, norm(P.Y()));
  if (!sol.report.converged && sol.report.residual > 1e-10 * scale) {
    throw ConvergenceError("gramians: Krylov solve stalled at residual " + std::to_string(sol.report.residual));
  }
  return std::move(sol.X);
}

}  // namespace

Gramians gramians(const MJLSSystem& sys, const GramianOptions& opt) {
  const MJLSProblem<double> obs = observability_problem(sys);
  StabilityOptions sopt;
  sopt.kronecker_limit = 0;
  const auto cert = is_ms_stable(obs, sopt);
  if (!cert.stable) {
    throw StabilityError("gramians: system is not certified mean-square stable (verdict " +
                         std::string(to_string(cert.verdict)) + ", rho(L^-1 Pi) = " + std::to_string(cert.rho_LinvPi) +
                         ")");
  }
  return {solve_gramian(controllability_problem(sys), opt), solve_gramian(obs, opt)};
}

H2Norm h2_norm(const MJLSSystem& sys, const GramianOptions& opt) {
  const Gramians G = gramians(sys, opt);
  H2Norm h;
  for (Index i = 0; i < sys.modes(); ++i) {
    h.via_controllability += (sys.C.block(i) * G.P.block(i) * sys.C.block(i).transpose()).trace();
    h.via_observability += sys.mu(i) * (sys.B.block(i).transpose() * G.Q.block(i) * sys.B.block(i)).trace();
  }
  const double scale = std::max(std::abs(h.via_controllability), std::abs(h.via_observability));
  if (scale > 0.0 && std::abs(h.via_controllability - h.via_observability) > 1e-6 * scale) {
    throw InvariantError("h2_norm: trace identity violated (" + std::to_string(h.via_controllability) + " vs " +
                         std::to_string(h.via_observability) + ")");
  }
  h.value = std::sqrt(std::max(0.0, h.via_controllability));
  return h;
}

}  // namespace mjls
