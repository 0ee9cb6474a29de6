#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace radsync {

/// Magic angle arccos(1/sqrt(3)): the near-field angular factor 3cos^2(theta)-1
/// of the elastic coupling vanishes here.
inline constexpr double kMagicAngle = 0.9553166181245093;
inline constexpr double kMaxZSteady = 0.3535533905932738;  // 1/sqrt(8)

struct LatticeSpec {
  int dimension = 1;  // 1 or 2; open boundaries
  int extent = 1;     // sites per axis
};

/// Frozen two-level dipoles: positions in units of the lattice spacing a,
/// a/lambda sets the optical phase per site, gamma the single-dipole decay
/// rate (the unit of rate; times are 1/gamma).
struct DipoleArray {
  std::vector<Eigen::Vector3d> positions;
  double spacing_over_lambda = 0.08;
  Eigen::Vector3d orientation{0.0, 0.0, 1.0};
  std::vector<double> detunings;
  double gamma = 1.0;

  int size() const { return static_cast<int>(positions.size()); }
  void validate() const;  // throws std::invalid_argument on violation

  /// Geometry-free array of n dipoles (collective / all-to-all couplings).
  static DipoleArray uniform(int n, double gamma = 1.0);
};

/// Distance-dependent rates in units of gamma, zeta = 2*pi*|r|/lambda.
/// cos2_theta is cos^2 of the angle between the mean dipole moment and r.
/// The small-zeta branch switches to series at zeta* = 0.1 (both branches
/// below 1e-14 relative error there).
double kernel_f(double zeta, double cos2_theta, double gamma);
double kernel_g(double zeta, double cos2_theta, double gamma);
double kernel_f_theta(double zeta, double theta, double gamma);
double kernel_g_theta(double zeta, double theta, double gamma);

enum class CouplingMode { dipolar, collective, dicke, powerlaw };

struct CouplingSpec {
  CouplingMode mode = CouplingMode::dipolar;
  double f_eff = 0.0;       // collective & dicke modes
  double alpha = 0.0;       // powerlaw exponent
  double prefactor = 0.25;  // powerlaw f_ab = prefactor*gamma*(a/r_ab)^alpha
};

/// Pairwise rate matrices. f carries the dissipative couplings with
/// f_aa = gamma (dicke mode excepted: all entries f_eff/N so the matrix stays
/// rank-1 positive semidefinite, as required for trajectory unravelings);
/// g carries the elastic couplings with zero diagonal.
struct CouplingMatrices {
  Eigen::MatrixXd f;
  Eigen::MatrixXd g;
  double f_eff = 0.0;  // sum_{a,b!=a} f_ab / (N-1)
  double g_eff = 0.0;
  int size() const { return static_cast<int>(f.rows()); }
  void validate() const;
};

DipoleArray build_lattice(const LatticeSpec& spec, double spacing_over_lambda,
                          const Eigen::Vector3d& orientation,
                          const std::vector<double>& detunings = {});
DipoleArray build_lattice(const LatticeSpec& spec, double spacing_over_lambda,
                          const Eigen::Vector3d& orientation, double detuning_scalar);

/// Chain along +x with the dipole orientation at angle theta from the axis.
DipoleArray build_chain(int n, double spacing_over_lambda, double theta,
                        const std::vector<double>& detunings = {});

/// Index of the central site (row-major ordering; floor(N/2)).
int central_site(const DipoleArray& array);

CouplingMatrices coupling_matrices(const DipoleArray& array, const CouplingSpec& spec);

/// Convenience builders for geometry-free systems.
CouplingMatrices collective_couplings(int n, double f_eff, double gamma = 1.0);
CouplingMatrices dicke_couplings(int n, double f_eff);

void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

}  // namespace radsync
