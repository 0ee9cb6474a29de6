#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <complex>
#include <span>
#include <vector>

#include "radsync/master_exact.hpp"

namespace radsync {

/// Permutation-invariant operator basis of the N-spin Liouville space:
/// multiplicities (n_uu, n_ud, n_du, n_dd) of the four single-site operator
/// classes |u><u|, |u><d|, |d><u|, |d><d|, summing to N. Size C(N+3,3).
class SymmetricSpace {
 public:
  explicit SymmetricSpace(int n);
  int sites() const { return n_; }
  int size() const { return static_cast<int>(states_.size()); }
  int index(int n_uu, int n_ud, int n_du) const;  // -1 if out of range
  const std::array<int, 4>& state(int idx) const { return states_[idx]; }

 private:
  int n_;
  std::vector<std::array<int, 4>> states_;
  std::vector<int> lookup_;
};

/// Generator of the all-to-all master equation (f_ab = f_eff/N off-diagonal,
/// f_aa = gamma, g = 0, delta = 0) restricted to the symmetric sector.
/// Coefficients are stored in the multinomial-rescaled convention in which
/// the trace functional has unit weights; the sparse action has O(1)
/// nonzeros per basis element.
class SymmetricGenerator {
 public:
  SymmetricGenerator(int n, double f_eff, double repump, double gamma = 1.0);

  const SymmetricSpace& space() const { return space_; }
  int sites() const { return space_.sites(); }
  int dim() const { return space_.size(); }
  double f_eff() const { return f_eff_; }
  double repump() const { return repump_; }
  double gamma() const { return gamma_; }

  void apply(const Eigen::VectorXd& d, Eigen::VectorXd& out) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& d) const;

  Eigen::VectorXd all_down() const;

  double trace_of(const Eigen::VectorXd& d) const;
  /// Residual of algebraic trace conservation, max_src |tr(A e_src)|.
  double trace_conservation_residual() const;

  double expect_sz(const Eigen::VectorXd& d) const;       // per-site <sigma^z>
  double excited_population(const Eigen::VectorXd& d) const;
  double pair_pm(const Eigen::VectorXd& d) const;         // <sp_a sm_b>, a != b
  double zq(const Eigen::VectorXd& d) const;              // sqrt(clip(pair_pm))
  Eigen::Matrix2cd reduced_single_state(const Eigen::VectorXd& d) const;
  Eigen::Matrix4cd reduced_pair_state(const Eigen::VectorXd& d) const;
  /// Expands to the full 2^N x 2^N matrix; guarded to N <= max_sites.
  DensityMatrix full_density_matrix(const Eigen::VectorXd& d, int max_sites = 14) const;

 private:
  SymmetricSpace space_;
  double f_eff_, repump_, gamma_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> op_;
  friend class MarkedSymmetricGenerator;
};

struct SymmetricSeries {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> states;
  bool steady = false;
};

SymmetricSeries evolve_symmetric(const SymmetricGenerator& gen, const Eigen::VectorXd& d0,
                                 std::span<const double> t_grid, const EvolveOptions& opt = {});

struct SymmetricSteadyResult {
  Eigen::VectorXd d;
  bool converged = false;
  double drift = 0.0;
  double t_end = 0.0;
};

SymmetricSteadyResult steady_symmetric(const SymmetricGenerator& gen,
                                       const SteadyStateOptions& opt = {});

/// Same dynamics on states with one distinguished site (4 x C(N+2,3)
/// coefficients); carries the quantum-regression propagation for two-time
/// correlations.
class MarkedSymmetricGenerator {
 public:
  explicit MarkedSymmetricGenerator(const SymmetricGenerator& base);

  int dim() const { return 4 * rest_.size(); }
  const SymmetricSpace& rest_space() const { return rest_; }
  int index(int marked_class, int rest_idx) const { return marked_class * rest_.size() + rest_idx; }

  void apply(const Eigen::VectorXd& d, Eigen::VectorXd& out) const;

  /// sigma_b^- applied to a symmetric state, site b becoming the marked one.
  Eigen::VectorXd lower_marked(const Eigen::VectorXd& d_sym) const;

  /// Tr[sigma_b^+ X] with b the marked site.
  double trace_sp_marked(const Eigen::VectorXd& dm) const;
  /// (1/(N-1)) sum_{a != b} Tr[sigma_a^+ X].
  double trace_sp_rest(const Eigen::VectorXd& dm) const;

 private:
  const SymmetricGenerator& base_;
  SymmetricSpace rest_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> op_;
};

/// Pairwise two-time correlation Z_{a,b}(tau) =
/// <(sp_a + sp_b)(t+tau)(sm_a + sm_b)(t)> evaluated on a symmetric state
/// (all pairs equivalent), via one marked-site regression propagation.
std::vector<std::complex<double>> two_time_symmetric(const SymmetricGenerator& gen,
                                                     const Eigen::VectorXd& d_steady,
                                                     std::span<const double> tau_grid,
                                                     const EvolveOptions& opt = {});

}  // namespace radsync
