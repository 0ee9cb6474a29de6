#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radsync/geometry.hpp"

namespace radsync {

/// Per-dipole Cartesian Bloch vectors; |S_a| <= 1/2 for physical states.
/// The transverse coherence is c_a = Sx + i*Sy = <sigma_a^->, phase
/// phi_a = atan2(Sy, Sx).
struct BlochState {
  Eigen::ArrayXd sx, sy, sz;

  int size() const { return static_cast<int>(sx.size()); }
  static BlochState zero(int n);
  static BlochState all_down(int n);  // S = (0,0,-1/2)
  static BlochState all_up(int n);
  /// Random phases uniform on [0,2pi), S_perp = (1-eps)/2, Sz = 0.
  static BlochState random_phases(int n, std::uint64_t seed, double eps = 1e-3);
  double max_norm() const;  // max_a |S_a|
};

struct OrderParameter {
  double Z = 0.0;
  double Phi = 0.0;
  double omega_bar = 0.0;
};

struct DetuningDistribution {
  enum class Kind { delta, lorentzian, uniform, list };
  Kind kind = Kind::delta;
  double width = 0.0;           // Lorentzian Delta or uniform half-width
  std::vector<double> values;   // explicit list

  static DetuningDistribution delta0() { return {}; }
  static DetuningDistribution lorentzian(double delta);
  static DetuningDistribution uniform(double half_width);
  static DetuningDistribution list(std::vector<double> v);
  static DetuningDistribution from_file(const std::filesystem::path& p);  // one value per line
};

/// Right-hand side of the Bloch equations in Cartesian components
/// (the polar form divides by S_perp and is singular at zero coherence).
void mf_derivatives(const BlochState& state, const CouplingMatrices& couplings, double repump,
                    const DipoleArray& array, BlochState& out);

struct MfOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double t_final = 0.0;         // 0 => 50*max(1/gamma, 1/W)
  double steady_tol = 1e-8;     // on max|dS/dt|, units gamma; 0 disables
  std::vector<double> sample_times;
};

struct MfSeries {
  std::vector<double> t;
  std::vector<BlochState> states;
  bool steady = false;
  std::string stop;             // "steady" or "t_final"
};

MfSeries integrate_mf(const BlochState& initial, const CouplingMatrices& couplings,
                      double repump, const DipoleArray& array, const MfOptions& opt = {});

OrderParameter order_parameter(const BlochState& state);
/// omega_bar from a linear fit of the unwrapped collective phase over the
/// last 20% of the series.
OrderParameter order_parameter_series(const MfSeries& series);

/// All-to-all f matrix whose per-site coupling sum is exactly f_eff
/// (f_ab = f_eff/(N-1)), so the finite-N fixed point matches the
/// infinite-N closed forms; g = 0.
CouplingMatrices mean_field_all_to_all(int n, double f_eff, double gamma = 1.0);

/// Steady-state order parameter of the homogeneous all-to-all model;
/// returns 0 on the unsynchronized branch. omega_bar = 0 here.
double z_closed_form(double f_eff, double repump, double gamma);
/// Steady Z for a Lorentzian detuning spread of width delta.
double z_lorentzian(double f_eff, double repump, double gamma, double delta);
/// Critical Lorentzian width at which Z reaches zero, (f_eff*P - Q^2)/(2Q).
double delta_critical(double f_eff, double repump, double gamma);
double w_optimal(double f_eff, double gamma);  // f_eff/2 - gamma

struct SelfConsistentResult {
  double Z = 0.0;
  double omega_bar = 0.0;
  bool nontrivial = false;           // false => only the Z=0 solution
  bool multiple_roots = false;
  std::vector<std::pair<double, double>> roots;  // (omega_bar, Z) of every root found
};

/// Solves the steady-state self-consistency pair for (Z, omega_bar) by
/// nested bracketing: bisection in Z at fixed omega_bar, Brent on the
/// frequency residual. Distributions are integrated by quadrature; explicit
/// lists are summed.
SelfConsistentResult self_consistent_solve(double f_eff, double g_eff, double repump,
                                           double gamma, const DetuningDistribution& dist);

/// CSV emission: header "t,Z,Phi,mean_Sz", one row per sample.
void write_mf_series_csv(const MfSeries& series, const std::filesystem::path& path);

}  // namespace radsync
