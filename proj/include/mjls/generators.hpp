#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mjls/model.hpp"
#include "mjls/stability.hpp"

namespace mjls {

/// Seeded normal/uniform source. mt19937_64 is bit-exact across standard
/// libraries; the std:: distributions are not, so the transforms live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Standard normal (Box-Muller, both variates used).
  double normal();
  MatrixXd normal_matrix(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct KnownExample {
  MJLSProblem<double> problem;
  SymTuple<double> solution;
};

/// n = 4, N = 2 instance with integer data and the exact solution
/// X_1 = ones, X_2 = [[2,1,-1,-2],[1,1,0,-1],[-1,0,1,1],[-2,-1,1,2]].
KnownExample known_example();

/// N = 2, Gamma = [[-0.3, 0.3], [0.5, -0.5]], A_i = -(M M^T / n + I),
/// Y_i = W W^T / n + 0.1 I with standard normal M, W.
MJLSProblem<double> random_spd_problem(Index n, std::uint64_t seed);

/// Nonsymmetric A_i = M / sqrt(n) - (alpha + 1) I (alpha the spectral abscissa
/// of M / sqrt(n)), random coupling rescaled by scale_coupling to
/// rho(L^{-1} Pi) in [0.9 target_rho, target_rho], Y_i = W W^T / n.
MJLSProblem<double> random_stable_problem(Index n, Index N, std::uint64_t seed, double target_rho);

struct CsmaConfig {
  int nu = 2;
  int tau = 3;
  double p_err_good = 0.03;
  double p_err_stay = 0.75;
  double a = 1.0;

  void validate() const;
  /// 2 nu^tau.
  Index states() const;
};

/// Decoded Markov state: error bit and the memory (s_t, s_{t-1}, ...),
/// stations numbered from 0.
struct CsmaState {
  int e = 0;
  std::vector<int> memory;
};

CsmaState csma_decode(const CsmaConfig& cfg, Index state);
Index csma_encode(const CsmaConfig& cfg, const CsmaState& s);
/// Label such as "0BAA".
std::string csma_label(const CsmaConfig& cfg, Index state);

/// Next-sender distribution given the memory (s_t, s_{t-1}, ...): w for a
/// station absent from the memory, w / (tau + 2 - pos) if its latest
/// transmission sits at 1-based position pos; w normalizes the sum to one.
std::vector<double> csma_sender_probabilities(const CsmaConfig& cfg, const std::vector<int>& memory);

/// Row-stochastic transition matrix of the sender/error chain. Row and
/// column order: error bit most significant, then s_t, s_{t-1}, ... with
/// station A < B < ...
MatrixXd csma_theta(const CsmaConfig& cfg);

/// Gamma = a (Theta - I), as a rate matrix.
CouplingMatrix<double> csma_rate(const MatrixXd& theta, double a);

/// Left Perron vector of a row-stochastic matrix, normalized to sum 1.
VectorXd stationary_distribution(const MatrixXd& theta);

/// dx = A_i x + B_i u, y = C_i x with Markov switching governed by gamma and
/// initial mode distribution mu.
struct MJLSSystem {
  ModeTuple<double> A, B, C;
  CouplingMatrix<double> gamma;
  VectorXd mu;

  void validate() const;
  Index n() const { return A.rows(); }
  Index modes() const { return A.modes(); }
};

struct CartConfig {
  int nu = 3;
  double m = 1.0;
  double g = 9.81;
  double R = 0.1;
  double a = 1.0;
  /// Stiffness entry of the cart block is -stiffness_factor m g.
  double stiffness_factor = 2.0;
};

/// nu carts on a parabolic track, one position/velocity pair each, observed
/// through the CSMA channel (tau = 3): mode i sees cart s_t unless the last
/// transmission failed.
MJLSSystem cart_system(const CartConfig& cfg = {});

/// Random MS-stable system: dissipative A_i (A_i + A_i^T <= -I), random rate
/// matrix, Gaussian B_i and C_i, random mu.
MJLSSystem random_stable_system(Index n, Index N, Index m, Index p, std::uint64_t seed);

/// A_i Q_i + ... with A_i^T, coupling Gamma and Y_i = C_i^T C_i.
MJLSProblem<double> observability_problem(const MJLSSystem& sys);
/// A_i P_i + P_i A_i^T + sum_j gamma_ji P_j + mu_i B_i B_i^T = 0 as an instance
/// with coupling Gamma^T.
MJLSProblem<double> controllability_problem(const MJLSSystem& sys);

struct GramianOptions {
  /// Direct Kronecker solve when N n^2 is at most this, Krylov-GS otherwise.
  Index direct_limit = 600;
  double tol = 1e-13;
  int max_iter = 500;
};

struct Gramians {
  SymTuple<double> P;  // controllability
  SymTuple<double> Q;  // observability
};

/// Refuses (StabilityError) unless the system is certified MS-stable.
Gramians gramians(const MJLSSystem& sys, const GramianOptions& opt = {});

struct H2Norm {
  double value = 0;
  double via_controllability = 0;  // sum_i tr(C_i P_i C_i^T)
  double via_observability = 0;    // sum_i mu_i tr(B_i^T Q_i B_i)
};

/// Both trace formulas; InvariantError when they differ by more than 1e-6 relative.
H2Norm h2_norm(const MJLSSystem& sys, const GramianOptions& opt = {});

}  // namespace mjls
