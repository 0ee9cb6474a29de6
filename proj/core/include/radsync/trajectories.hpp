#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "radsync/geometry.hpp"
#include "radsync/master_exact.hpp"

namespace radsync {

using PureState = Eigen::VectorXcd;

PureState all_down_pure(int n);
PureState all_up_pure(int n);

/// Lindblad channels of the unraveled master equation: the symmetric f matrix
/// decomposed into orthogonal collective decay channels (eigenvalues clipped
/// at [-1e-12, 0] -> dropped; below -1e-9 -> rejected as unphysical), plus one
/// repump channel sqrt(W) sp_a per site.
struct ChannelSet {
  int n = 0;
  std::vector<double> decay_rates;        // lambda_k > 0
  Eigen::MatrixXd decay_vectors;          // column k: site amplitudes of channel k
  double repump = 0.0;
  double total_rate_bound() const;        // sum lambda_k + N W
};

ChannelSet make_channels(const CouplingMatrices& couplings, double repump);

/// Matrix-free y = (-iH - K/2) x with K = sum_ab f_ab sp_a sm_b
/// + W sum_a sm_a sp_a; the nonunitary generator between jumps.
class DriftOperator {
 public:
  DriftOperator(const DipoleArray& array, const CouplingMatrices& couplings, double repump);
  int sites() const { return n_; }
  int dim() const { return dim_; }
  void apply(const PureState& x, PureState& y) const;
  double norm_bound() const { return norm_bound_; }

 private:
  int n_, dim_;
  Eigen::VectorXcd diag_;
  struct PairTerm {
    int mask_a, mask_b;
    std::complex<double> coeff;
  };
  std::vector<PairTerm> pairs_;
  std::complex<double> collective_coeff_{0.0, 0.0};  // uniform-coupling fast path
  double norm_bound_ = 0.0;
};

// --- elementary operator applications (shared by engines and observables) ---
void apply_sigma_minus(int site, const PureState& in, PureState& out_accum,
                       std::complex<double> scale = 1.0);
void apply_sigma_plus(int site, const PureState& in, PureState& out_accum,
                      std::complex<double> scale = 1.0);
void apply_channel_lower(const Eigen::VectorXd& weights, const PureState& in, PureState& out);
void apply_channel_raise(const Eigen::VectorXd& weights, const PureState& in, PureState& out);

std::complex<double> pure_pair_pm(const PureState& psi, int a, int b);  // <sp_a sm_b>
double pure_sz(const PureState& psi, int site);
/// Average of <sp_a sm_b> over ordered pairs a != b.
std::complex<double> pure_pair_pm_mean(const PureState& psi);
Eigen::Matrix4cd pure_pair_reduced(const PureState& psi, int a, int b);
Eigen::Matrix4cd pure_pair_reduced_mean(const PureState& psi);

/// Direction-averaged quantum Fisher information of a pure state,
/// (4/3) sum_k Var(J_k); exceeds 2N/3 only for entangled states, bounded
/// by (N^2+2N)/3.
double conditional_qfi(const PureState& psi);

/// Mixed-state QFI, direction averaged: spectral formula
/// 2 sum_{ij} (l_i - l_j)^2 |<i|J|j>|^2 / (l_i + l_j) over l_i + l_j > eps.
double ensemble_qfi_mixed(const DensityMatrix& rho, double eps = 1e-12);

/// Adaptive Arnoldi propagation of exp(tau * Drift) applied to a state;
/// supports cheap in-subspace evaluation at intermediate times, used for
/// jump-time location.
class KrylovPropagator {
 public:
  KrylovPropagator(const DriftOperator& drift, int max_krylov = 24, double tol = 1e-9);

  /// Builds the subspace at psi (assumed nonzero) and selects a step
  /// tau <= tau_request meeting the error tolerance. Returns the step taken.
  double start_segment(const PureState& psi, double tau_request);
  /// Squared norm of the unnormalized propagated state at theta in [0, step].
  double norm2_at(double theta);
  /// Propagated (unnormalized) state at theta in [0, step].
  void eval_at(double theta, PureState& out);

 private:
  const DriftOperator& drift_;
  int max_m_;
  double tol_;
  Eigen::MatrixXcd basis_;   // dim x (m+1)
  Eigen::MatrixXcd hess_;    // (m+1) x m
  int m_eff_ = 0;
  double beta_ = 0.0;
  double step_ = 0.0;
  bool invariant_ = false;
  // spectral form of the small Hessenberg block for O(m^2) evaluations
  bool spectral_ok_ = false;
  Eigen::VectorXcd eig_;
  Eigen::MatrixXcd evec_;
  Eigen::VectorXcd w0_;      // evec^{-1} e1
  Eigen::MatrixXcd pade_cache_;
  double pade_theta_ = -1.0;
  Eigen::VectorXcd small_col(double theta);  // e^{theta H} e1 (length m_eff)
};

struct TrajectoryRecord {
  std::complex<double> pair_pm;   // time-averaged pair-mean correlator
  double mean_sz = 0.0;
  double fq = 0.0;                // time-averaged conditional QFI
  double fq_max = 0.0;            // largest sampled conditional QFI
  Eigen::Matrix4cd pair_state;    // time-averaged pair-mean reduced state
  int samples = 0;
};

struct JumpOptions {
  int trajectories = 100;
  double t_burn = 10.0;
  double t_end = 30.0;            // samples taken on [t_burn, t_end]
  double sample_dt = 0.5;
  std::uint64_t seed = 1;
  unsigned workers = 0;           // 0 => hardware
  int max_krylov = 24;
  double krylov_tol = 1e-9;
  bool collect_pair_state = false;
  bool collect_fq = false;
};

/// One conditional jump trajectory, sampling the requested times.
TrajectoryRecord run_jump_trajectory(const DriftOperator& drift, const ChannelSet& channels,
                                     const PureState& psi0, const JumpOptions& opt,
                                     std::uint64_t trajectory_seed);

/// Independent trajectories with per-index seeds; results do not depend on
/// the worker count.
std::vector<TrajectoryRecord> run_jump_ensemble(const DipoleArray& array,
                                                const CouplingMatrices& couplings,
                                                double repump, const JumpOptions& opt);

struct QsdOptions {
  int trajectories = 200;
  double dt = 0.0;                // 0 => 1e-3/(gamma + W + f_eff)
  double t_burn = 4.0;
  double t_end = 6.0;
  double sample_dt = 0.25;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  bool collect_fq = true;
  bool collect_pair_state = false;
  bool accumulate_rho = false;    // accumulate the full conditional projector
};

struct QsdEnsembleResult {
  std::vector<TrajectoryRecord> records;
  DensityMatrix rho_mean;         // filled when accumulate_rho
  double dt_used = 0.0;
};

/// Euler-Maruyama quantum-state-diffusion step (homodyne-type unraveling,
/// independent complex Wiener increment per channel); state renormalized.
void qsd_step(PureState& psi, const DriftOperator& drift, const ChannelSet& channels,
              double dt, std::mt19937_64& rng);

QsdEnsembleResult run_qsd_ensemble(const DipoleArray& array, const CouplingMatrices& couplings,
                                   double repump, const QsdOptions& opt);

/// Mean and standard error of scalar projections of trajectory records.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe reduce_mean_se(std::span<const double> values);

}  // namespace radsync
