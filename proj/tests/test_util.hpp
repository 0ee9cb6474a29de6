#pragma once

#include <Eigen/Dense>
#include <complex>
#include <random>

#include "radsync/master_exact.hpp"

namespace radsync::testing {

inline DensityMatrix random_density(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  DensityMatrix a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = std::complex<double>(g(rng), g(rng));
  DensityMatrix rho = a * a.adjoint();
  rho /= rho.trace().real();
  return rho;
}

inline DensityMatrix random_product_density(int n_sites, std::uint64_t seed) {
  DensityMatrix rho = DensityMatrix::Ones(1, 1);
  for (int i = 0; i < n_sites; ++i) {
    DensityMatrix single = random_density(2, seed * 101 + i);
    DensityMatrix next(rho.rows() * 2, rho.cols() * 2);
    for (int r = 0; r < rho.rows(); ++r)
      for (int c = 0; c < rho.cols(); ++c) next.block(2 * r, 2 * c, 2, 2) = rho(r, c) * single;
    rho = next;
  }
  return rho;
}

inline Eigen::Matrix4cd bell_state() {
  Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
  psi[0] = 1.0 / std::sqrt(2.0);   // |uu>
  psi[3] = 1.0 / std::sqrt(2.0);   // |dd>
  return psi * psi.adjoint();
}

// independent entropy route: cyclic Jacobi eigenvalues of a Hermitian matrix
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXcd m, int sweeps = 60) {
  const int n = static_cast<int>(m.rows());
  for (int s = 0; s < sweeps; ++s) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::norm(m(p, q));
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        std::complex<double> apq = m(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double app = m(p, p).real(), aqq = m(q, q).real();
        // phase rotation making the pivot real, then a real Jacobi rotation
        std::complex<double> phase = apq / std::abs(apq);
        double tau = (aqq - app) / (2.0 * std::abs(apq));
        double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t), sn = t * c;
        Eigen::MatrixXcd rot = Eigen::MatrixXcd::Identity(n, n);
        rot(p, p) = c;
        rot(p, q) = sn * phase;
        rot(q, p) = -sn * std::conj(phase);
        rot(q, q) = c;
        m = rot.adjoint() * m * rot;
      }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = m(i, i).real();
  return ev;
}

}  // namespace radsync::testing
