#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <vector>

#include "radsync/master_exact.hpp"

namespace radsync {

/// Two-site state over the basis {uu, ud, du, dd}; subsystem A is the first
/// site.
using PairState = Eigen::Matrix4cd;

struct ZqFromState {
  double zq = 0.0;
  double raw_re = 0.0;
  double imag_residual = 0.0;
};

/// Pair-averaged spin-spin coherence of a full density matrix; negative
/// averages clip to zq = 0 with the raw value retained.
ZqFromState zq_of_density(const DensityMatrix& rho);

/// Base-2 von Neumann entropy; eigenvalues below `clip` contribute zero.
double vn_entropy_bits(const Eigen::MatrixXcd& rho, double clip = 1e-12);

/// I = S_A + S_B - S_AB, in [0, 2] for two qubits.
double mutual_information(const PairState& rho);

struct DiscordOptions {
  int grid_phi = 64;
  int grid_theta = 32;
  int restarts = 8;
  double tol = 1e-6;
  std::uint64_t seed = 12345;
};

struct DiscordResult {
  double discord = 0.0;
  double mutual_information = 0.0;
  double classical = 0.0;          // max_n [S_B - S_{B|A}(n)]
  Eigen::Vector3d best_axis{0, 0, 1};
};

/// Quantum discord D_{B|A} with projective measurements on A; the direction
/// search runs a spherical grid followed by simplex refinement and random
/// restarts.
DiscordResult quantum_discord(const PairState& rho, const DiscordOptions& opt = {});

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

struct TwoTimeFit {
  double amplitude = 0.0;
  double nu = 0.0;          // oscillation frequency; snapped to 0 below resolution
  double gamma = 0.0;       // decay rate, >= 0
  double residual = 0.0;    // rms residual
  bool converged = false;
  double nu_resolution = 0.0;
};

struct TwoTimeFitOptions {
  double zero_threshold = 0.0;  // 0 => 2*pi/span
  int max_iterations = 200;
};

/// Least-squares fit of Re Z(tau) to A cos(nu tau) exp(-gamma tau); initial
/// nu from the discrete spectrum peak, initial gamma from the log-envelope
/// slope. Requires >= 40 samples.
TwoTimeFit fit_two_time(std::span<const double> tau, std::span<const std::complex<double>> z,
                        const TwoTimeFitOptions& opt = {});

struct FrequencyHistogram {
  std::vector<double> bin_centers;
  std::vector<int> counts;
  std::vector<double> nu_values;  // raw |nu| table
  double entrained_fraction = 0.0;
};

FrequencyHistogram frequency_histogram(std::span<const TwoTimeFit> fits, int bins = 20);

}  // namespace radsync
