#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <vector>

#include "radsync/master_exact.hpp"

namespace radsync {

/// Second-order moment set closed under the master equation with the
/// third-order factorization <ABC> = <AB><C> + <A><BC> + <AC><B> - 2<A><B><C>.
/// Pauli normalization: sigma^z eigenvalues +-1. Off-diagonal storage only;
/// P(b,a) = conj(P(a,b)) and zz, Q symmetric are maintained by the flow.
struct CumulantState {
  int n = 0;
  Eigen::VectorXd s;    // <sigma_a^z>
  Eigen::VectorXcd p;   // <sigma_a^+>
  Eigen::MatrixXcd P;   // <sp_a sm_b>, zero diagonal
  Eigen::MatrixXcd Q;   // <sp_a sp_b>, zero diagonal, symmetric
  Eigen::MatrixXd zz;   // <sz_a sz_b>, zero diagonal, symmetric
  Eigen::MatrixXcd R;   // <sp_a sz_b>, zero diagonal

  static CumulantState all_down(int n);
  /// Moment extraction from an exact density matrix (cross-checks; N <= 8).
  static CumulantState from_density_matrix(const DensityMatrix& rho);
  int size() const { return n; }
  /// True when p, Q, R vanish (incoherent sector; preserved by the flow).
  bool u1_compatible(double tol = 0.0) const;
  double max_abs() const;
};

/// Full right-hand side; exact (closure-free) for N = 2.
void cumulant_derivatives(const CumulantState& state, const CouplingMatrices& couplings,
                          double repump, const DipoleArray& array, CumulantState& out);

struct CumulantOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  bool u1_reduction = false;  // drop p, Q, R (valid for incoherent initial data)
  double steady_tol = 0.0;
  double t_max = 400.0;
};

struct CumulantSeries {
  std::vector<double> t;
  std::vector<CumulantState> states;
  bool steady = false;
};

CumulantSeries evolve_cumulant(const CumulantState& initial, const CouplingMatrices& couplings,
                               double repump, const DipoleArray& array,
                               std::span<const double> t_grid, const CumulantOptions& opt = {});

struct CumulantSteadyResult {
  CumulantState state;
  bool converged = false;
  double drift = 0.0;
  double t_end = 0.0;
};

/// Steady state from the all-down start (u1 path recommended).
CumulantSteadyResult steady_cumulant(const CouplingMatrices& couplings, double repump,
                                     const DipoleArray& array, const CumulantOptions& opt = {});

struct ZqValue {
  double zq = 0.0;            // sqrt of the clipped real pair average
  double raw_re = 0.0;        // unclipped real part (negative => subradiant)
  double imag_residual = 0.0; // |imaginary part| of the pair average
};

ZqValue zq_all(const CumulantState& state);
/// Pair average over a linear cluster of d sites starting at the central
/// spin of a chain geometry.
ZqValue zq_cluster(const CumulantState& state, int d, const DipoleArray& array);

/// Two-time pair correlation Z_{a,b}(tau) from a steady state: propagates the
/// N-vector <sp_j(t+tau) sm_b(t)> under the linear system with frozen <sz>
/// and assembles the four-term sum.
std::vector<std::complex<double>> two_time_cumulant(const CumulantState& steady,
                                                    const CouplingMatrices& couplings,
                                                    const DipoleArray& array, double repump,
                                                    int a, int b,
                                                    std::span<const double> tau_grid);

/// The same propagation for all source sites b at once; returns the matrix
/// V[j][tau] of <sp_j(t+tau) sm_b(t)> for one b, or use the convenience
/// below for many fits against a common site.
std::vector<std::vector<std::complex<double>>> two_time_cumulant_all(
    const CumulantState& steady, const CouplingMatrices& couplings, const DipoleArray& array,
    double repump, int a, std::span<const int> partners, std::span<const double> tau_grid);

}  // namespace radsync
