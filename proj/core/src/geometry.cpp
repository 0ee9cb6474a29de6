#include "radsync/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "radsync/util.hpp"

namespace radsync {

namespace {

// Series switch. Below zeta* the bracketed radial functions are evaluated by
// 6-term expansions; the direct forms lose ~1e-12 relative accuracy near
// zeta ~ 1e-2 through cancellation of the 1/zeta^2 pieces.
constexpr double kSeriesSwitch = 0.1;

// A(z) = sin(z)/z^3 - cos(z)/z^2 = sum_{k>=1} (-1)^{k+1} 2k z^{2k-2}/(2k+1)!
double radial_a(double z) {
  if (z < kSeriesSwitch) {
    const double z2 = z * z;
    return 1.0 / 3.0 +
           z2 * (-1.0 / 30.0 +
                 z2 * (1.0 / 840.0 +
                       z2 * (-1.0 / 45360.0 +
                             z2 * (1.0 / 3991680.0 + z2 * (-1.0 / 518918400.0)))));
  }
  return std::sin(z) / (z * z * z) - std::cos(z) / (z * z);
}

// B(z) = cos(z)/z^3 + sin(z)/z^2 = 1/z^3 + 1/(2z) - z/8 + z^3/144 - ...
double radial_b(double z) {
  if (z < kSeriesSwitch) {
    const double z2 = z * z;
    double tail = z * (-1.0 / 8.0 +
                       z2 * (1.0 / 144.0 +
                             z2 * (-1.0 / 5760.0 +
                                   z2 * (1.0 / 403200.0 + z2 * (-1.0 / 43545600.0)))));
    return 1.0 / (z * z * z) + 1.0 / (2.0 * z) + tail;
  }
  return std::cos(z) / (z * z * z) + std::sin(z) / (z * z);
}

void check_zeta(double zeta, const char* who) {
  if (!(zeta > 0))
    throw std::invalid_argument(std::string(who) + ": requires zeta > 0 (got " +
                                std::to_string(zeta) + "); the zero-separation rate is the "
                                "diagonal entry of the coupling matrix, not a kernel value");
}

}  // namespace

double kernel_f(double zeta, double cos2_theta, double gamma) {
  check_zeta(zeta, "kernel_f");
  const double sin2 = 1.0 - cos2_theta;
  const double angular = 3.0 * cos2_theta - 1.0;
  return 1.5 * gamma * (sin2 * std::sin(zeta) / zeta + angular * radial_a(zeta));
}

double kernel_g(double zeta, double cos2_theta, double gamma) {
  check_zeta(zeta, "kernel_g");
  const double sin2 = 1.0 - cos2_theta;
  const double angular = 3.0 * cos2_theta - 1.0;
  return -1.5 * gamma * (sin2 * std::cos(zeta) / zeta + angular * radial_b(zeta));
}

double kernel_f_theta(double zeta, double theta, double gamma) {
  const double c = std::cos(theta);
  return kernel_f(zeta, c * c, gamma);
}

double kernel_g_theta(double zeta, double theta, double gamma) {
  const double c = std::cos(theta);
  return kernel_g(zeta, c * c, gamma);
}

void DipoleArray::validate() const {
  if (positions.empty()) throw std::invalid_argument("DipoleArray: zero sites");
  if (detunings.size() != positions.size())
    throw std::invalid_argument("DipoleArray: detunings length mismatch");
  if (!(gamma > 0)) throw std::invalid_argument("DipoleArray: gamma must be positive");
  if (!(spacing_over_lambda > 0))
    throw std::invalid_argument("DipoleArray: spacing_over_lambda must be positive");
  if (std::abs(orientation.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("DipoleArray: orientation not unit norm");
  for (std::size_t a = 0; a < positions.size(); ++a)
    for (std::size_t b = a + 1; b < positions.size(); ++b)
      if ((positions[a] - positions[b]).norm() < 1e-12)
        throw std::invalid_argument("DipoleArray: coincident sites " + std::to_string(a) +
                                    "," + std::to_string(b));
}

DipoleArray DipoleArray::uniform(int n, double gamma) {
  if (n < 1) throw std::invalid_argument("DipoleArray::uniform: n < 1");
  DipoleArray arr;
  arr.gamma = gamma;
  arr.detunings.assign(n, 0.0);
  arr.positions.resize(n);
  for (int i = 0; i < n; ++i) arr.positions[i] = Eigen::Vector3d(i, 0, 0);
  return arr;
}

namespace {

Eigen::Vector3d normalize_orientation(const Eigen::Vector3d& orientation) {
  double norm = orientation.norm();
  if (std::abs(norm - 1.0) > 1e-6)
    throw std::invalid_argument("build_lattice: orientation deviates from unit norm by " +
                                std::to_string(std::abs(norm - 1.0)));
  if (std::abs(norm - 1.0) > 1e-12) {
    std::fprintf(stderr, "radsync: normalizing orientation (|v|-1 = %.3e)\n", norm - 1.0);
    return orientation / norm;
  }
  return orientation;
}

}  // namespace

DipoleArray build_lattice(const LatticeSpec& spec, double spacing_over_lambda,
                          const Eigen::Vector3d& orientation,
                          const std::vector<double>& detunings) {
  if (spec.extent < 1) throw std::invalid_argument("build_lattice: extent < 1");
  if (spec.dimension != 1 && spec.dimension != 2)
    throw std::invalid_argument("build_lattice: dimension must be 1 or 2");
  DipoleArray arr;
  arr.spacing_over_lambda = spacing_over_lambda;
  arr.orientation = normalize_orientation(orientation);
  const int n = spec.dimension == 1 ? spec.extent : spec.extent * spec.extent;
  arr.positions.reserve(n);
  if (spec.dimension == 1) {
    for (int i = 0; i < spec.extent; ++i) arr.positions.emplace_back(i, 0, 0);
  } else {
    for (int row = 0; row < spec.extent; ++row)  // row-major site ordering
      for (int col = 0; col < spec.extent; ++col) arr.positions.emplace_back(col, row, 0);
  }
  if (detunings.empty())
    arr.detunings.assign(n, 0.0);
  else if (detunings.size() == 1)
    arr.detunings.assign(n, detunings[0]);
  else if (static_cast<int>(detunings.size()) == n)
    arr.detunings = detunings;
  else
    throw std::invalid_argument("build_lattice: detunings must be scalar or match site count");
  arr.validate();
  return arr;
}

DipoleArray build_lattice(const LatticeSpec& spec, double spacing_over_lambda,
                          const Eigen::Vector3d& orientation, double detuning_scalar) {
  return build_lattice(spec, spacing_over_lambda, orientation,
                       std::vector<double>{detuning_scalar});
}

DipoleArray build_chain(int n, double spacing_over_lambda, double theta,
                        const std::vector<double>& detunings) {
  // chain along +x; orientation tilted by theta in the x-z plane
  Eigen::Vector3d orient(std::cos(theta), 0.0, std::sin(theta));
  return build_lattice({1, n}, spacing_over_lambda, orient, detunings);
}

int central_site(const DipoleArray& array) { return array.size() / 2; }

void CouplingMatrices::validate() const {
  const int n = size();
  if (g.rows() != n || g.cols() != n || f.cols() != n)
    throw std::invalid_argument("CouplingMatrices: shape mismatch");
  double scale = std::max(f.cwiseAbs().maxCoeff(), 1e-300);
  if ((f - f.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("CouplingMatrices: f not symmetric");
  double gscale = std::max(g.cwiseAbs().maxCoeff(), scale);
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * gscale)
    throw std::invalid_argument("CouplingMatrices: g not symmetric");
}

namespace {

void fill_effective(CouplingMatrices& cm) {
  const int n = cm.size();
  if (n < 2) {
    cm.f_eff = 0;
    cm.g_eff = 0;
    return;
  }
  double fs = 0, gs = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) {
        fs += cm.f(a, b);
        gs += cm.g(a, b);
      }
  cm.f_eff = fs / (n - 1);
  cm.g_eff = gs / (n - 1);
}

}  // namespace

CouplingMatrices coupling_matrices(const DipoleArray& array, const CouplingSpec& spec) {
  array.validate();
  const int n = array.size();
  CouplingMatrices cm;
  cm.f = Eigen::MatrixXd::Zero(n, n);
  cm.g = Eigen::MatrixXd::Zero(n, n);

  switch (spec.mode) {
    case CouplingMode::dipolar: {
      const double k = 2.0 * M_PI * array.spacing_over_lambda;  // zeta per unit spacing
      for (int a = 0; a < n; ++a) {
        cm.f(a, a) = array.gamma;
        for (int b = a + 1; b < n; ++b) {
          Eigen::Vector3d r = array.positions[b] - array.positions[a];
          double dist = r.norm();
          double zeta = k * dist;
          double cosang = array.orientation.dot(r) / dist;
          double c2 = cosang * cosang;
          double fv = kernel_f(zeta, c2, array.gamma);
          double gv = kernel_g(zeta, c2, array.gamma);
          cm.f(a, b) = cm.f(b, a) = fv;
          cm.g(a, b) = cm.g(b, a) = gv;
        }
      }
      break;
    }
    case CouplingMode::collective: {
      const double fc = spec.f_eff / n;
      cm.f.setConstant(fc);
      cm.f.diagonal().setConstant(array.gamma);
      break;
    }
    case CouplingMode::dicke: {
      cm.f.setConstant(spec.f_eff / n);
      break;
    }
    case CouplingMode::powerlaw: {
      for (int a = 0; a < n; ++a) {
        cm.f(a, a) = array.gamma;
        for (int b = a + 1; b < n; ++b) {
          double dist = (array.positions[b] - array.positions[a]).norm();
          double fv = spec.prefactor * array.gamma * std::pow(1.0 / dist, spec.alpha);
          cm.f(a, b) = cm.f(b, a) = fv;
        }
      }
      break;
    }
  }
  fill_effective(cm);
  cm.validate();
  return cm;
}

CouplingMatrices collective_couplings(int n, double f_eff, double gamma) {
  return coupling_matrices(DipoleArray::uniform(n, gamma),
                           {CouplingMode::collective, f_eff, 0.0, 0.0});
}

CouplingMatrices dicke_couplings(int n, double f_eff) {
  return coupling_matrices(DipoleArray::uniform(n), {CouplingMode::dicke, f_eff, 0.0, 0.0});
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 24);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_g17(m(r, c));
    }
    out += '\n';
  }
  atomic_write_file(path, out);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::string text = read_file(path);
  std::vector<std::vector<double>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.emplace_back();
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) rows.back().push_back(std::stod(cell));
  }
  if (rows.empty()) throw std::runtime_error("read_matrix_csv: empty file " + path.string());
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size())
      throw std::runtime_error("read_matrix_csv: ragged rows in " + path.string());
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

}  // namespace radsync
