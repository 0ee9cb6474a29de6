#pragma once

#include <Eigen/Dense>
#include <complex>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radsync/geometry.hpp"

namespace radsync {

using DensityMatrix = Eigen::MatrixXcd;

/// Matrix-free action of the master-equation generator on 2^N x 2^N
/// operators: Hamiltonian commutator (detunings + elastic hopping),
/// dissipative pair emission with rate matrix f (diagonal = single-dipole
/// decay), and incoherent repumping at rate W.
///
/// Basis ordering: site 0 is the most significant bit, |up> (bit 0) sorts
/// before |down> (bit 1); index 0 is the all-up state.
class Liouvillian {
 public:
  Liouvillian(const DipoleArray& array, const CouplingMatrices& couplings, double repump,
              int dense_cap = 8);

  int sites() const { return n_; }
  int dim() const { return dim_; }
  double repump() const { return W_; }
  const DipoleArray& array() const { return array_; }
  const CouplingMatrices& couplings() const { return couplings_; }

  void apply(const DensityMatrix& rho, DensityMatrix& out) const;          // L(rho)
  void apply_adjoint(const DensityMatrix& x, DensityMatrix& out) const;    // Heisenberg
  DensityMatrix apply(const DensityMatrix& rho) const;

  /// Column-stacked superoperator, vec(rho)[c*dim + r] = rho(r,c).
  Eigen::MatrixXcd dense_superoperator() const;

 private:
  void apply_impl(const DensityMatrix& in, DensityMatrix& out, bool adjoint) const;

  DipoleArray array_;
  CouplingMatrices couplings_;
  double W_;
  int n_, dim_;
  Eigen::VectorXd hdiag_;   // (1/2) sum_a delta_a z_a(s)
  Eigen::VectorXd ddiag_;   // -(1/2) sum_a [f_aa (bit=up) + W (bit=down)]
};

DensityMatrix all_down_density(int n);
DensityMatrix all_up_density(int n);
DensityMatrix maximally_mixed(int n);

struct EvolveOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double steady_tol = 0.0;  // >0: stop when max|d rho/dt| < steady_tol
  double trace_drift_warn = 1e-9;
};

struct EvolveResult {
  std::vector<DensityMatrix> states;  // at the requested sample times
  std::vector<double> t;
  double max_trace_drift = 0.0;       // max |Tr rho - Tr rho0| observed
  bool steady = false;
};

EvolveResult evolve(const DensityMatrix& rho0, const Liouvillian& liouv,
                    std::span<const double> t_grid, const EvolveOptions& opt = {});

struct SteadyStateOptions {
  double rtol = 1e-10;
  double atol = 1e-13;
  double drift_tol = 1e-9;  // max|d rho/dt| per unit time, units gamma
  double t_max = 400.0;
};

struct SteadyStateResult {
  DensityMatrix rho;
  bool converged = false;
  double drift = 0.0;
  double t_end = 0.0;
};

/// Long-time integration until the generator action has sup-norm below
/// drift_tol. Throws on non-convergence within t_max.
SteadyStateResult steady_state(const Liouvillian& liouv, const SteadyStateOptions& opt = {});

/// Null-space extraction from the dense superoperator with the trace
/// constraint replacing one row; N <= 6.
DensityMatrix steady_state_nullspace(const Liouvillian& liouv);

/// Two-time pair correlation <(sp_a + sp_b)(t+tau) (sm_a + sm_b)(t)> by
/// quantum regression from the state rho at time t (pass b = -1 for the
/// single-site correlation).
std::vector<std::complex<double>> two_time_exact(const DensityMatrix& rho,
                                                 const Liouvillian& liouv, int a, int b,
                                                 std::span<const double> tau_grid,
                                                 const EvolveOptions& opt = {});

// --- expectation helpers (basis convention above) ---
double expect_sz(const DensityMatrix& rho, int site);
double mean_sz(const DensityMatrix& rho);
std::complex<double> expect_sp(const DensityMatrix& rho, int site);  // <sigma^+>
std::complex<double> pair_correlator_pm(const DensityMatrix& rho, int a, int b);
Eigen::Matrix4cd pair_reduced_state(const DensityMatrix& rho, int a, int b);
Eigen::Matrix2cd single_reduced_state(const DensityMatrix& rho, int a);

/// Checks Hermiticity/trace/positivity within tolerances; throws otherwise.
void check_density_matrix(const DensityMatrix& rho, double herm_tol = 1e-10,
                          double trace_tol = 1e-10, double eig_tol = 1e-8);

void write_density_binary(const DensityMatrix& rho, const std::filesystem::path& path);
DensityMatrix read_density_binary(const std::filesystem::path& path);
/// CSV: dim rows of real parts then dim rows of imaginary parts.
void write_density_csv(const DensityMatrix& rho, const std::filesystem::path& path);

}  // namespace radsync
