#include "radsync/master_exact.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "radsync/ode.hpp"
#include "radsync/util.hpp"

namespace radsync {

namespace {

inline int bit_of(int state, int site, int n) { return (state >> (n - 1 - site)) & 1; }
inline int mask_of(int site, int n) { return 1 << (n - 1 - site); }

}  // namespace

Liouvillian::Liouvillian(const DipoleArray& array, const CouplingMatrices& couplings,
                         double repump, int dense_cap)
    : array_(array), couplings_(couplings), W_(repump), n_(array.size()), dim_(1 << array.size()) {
  array_.validate();
  couplings_.validate();
  if (couplings_.size() != n_) throw std::invalid_argument("Liouvillian: coupling size mismatch");
  if (W_ < 0) throw std::invalid_argument("Liouvillian: repump must be >= 0");
  if (n_ > dense_cap)
    throw std::invalid_argument("Liouvillian: N = " + std::to_string(n_) + " exceeds cap " +
                                std::to_string(dense_cap) +
                                "; use the trajectory engine for larger systems");

  hdiag_.resize(dim_);
  ddiag_.resize(dim_);
  for (int s = 0; s < dim_; ++s) {
    double h = 0, d = 0;
    for (int a = 0; a < n_; ++a) {
      const int b = bit_of(s, a, n_);
      h += 0.5 * array_.detunings[a] * (b == 0 ? 1.0 : -1.0);
      d -= 0.5 * (b == 0 ? couplings_.f(a, a) : W_);
    }
    hdiag_[s] = h;
    ddiag_[s] = d;
  }
}

void Liouvillian::apply_impl(const DensityMatrix& in, DensityMatrix& out, bool adjoint) const {
  using cd = std::complex<double>;
  const int dim = dim_;
  out.setZero(dim, dim);

  // diagonal part: out(r,c) += (ddiag[r] + ddiag[c] -+ i(hdiag[r]-hdiag[c])) in(r,c)
  const double hsign = adjoint ? +1.0 : -1.0;
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r < dim; ++r)
      out(r, c) += (cd(ddiag_[r] + ddiag_[c], 0.0) +
                    cd(0.0, hsign * (hdiag_[r] - hdiag_[c]))) *
                   in(r, c);

  // hopping terms: left and right multiplication by sp_a sm_b (a != b)
  for (int a = 0; a < n_; ++a) {
    const int ma = mask_of(a, n_);
    for (int b = 0; b < n_; ++b) {
      if (b == a) continue;
      const int mb = mask_of(b, n_);
      const double fab = couplings_.f(a, b), gab = couplings_.g(a, b);
      if (fab == 0.0 && gab == 0.0) continue;
      // Schroedinger: left coeff -(f + i g)/2, right conj; adjoint flips the g sign.
      const cd cl = adjoint ? cd(-0.5 * fab, 0.5 * gab) : cd(-0.5 * fab, -0.5 * gab);
      const cd cr = std::conj(cl);
      for (int s = 0; s < dim; ++s) {
        if (bit_of(s, a, n_) == 1 && bit_of(s, b, n_) == 0) {
          const int s2 = (s | mb) & ~ma;  // sp_a sm_b moves the excitation b -> a
          out.row(s2) += cl * in.row(s);
          out.col(s2) += cr * in.col(s);
        }
      }
    }
  }

  // sandwich terms
  if (!adjoint) {
    // sum_ab f_ab sm_b rho sp_a : out(r|mb, c|ma) += f_ab in(r, c), bits (b,r)=(a,c)=up
    for (int a = 0; a < n_; ++a) {
      const int ma = mask_of(a, n_);
      for (int b = 0; b < n_; ++b) {
        const int mb = mask_of(b, n_);
        const double fab = couplings_.f(a, b);
        if (fab == 0.0) continue;
        for (int c = 0; c < dim; ++c) {
          if (bit_of(c, a, n_) != 0) continue;
          const int c2 = c | ma;
          for (int r = 0; r < dim; ++r)
            if (bit_of(r, b, n_) == 0) out(r | mb, c2) += fab * in(r, c);
        }
      }
    }
    // W sum_a sp_a rho sm_a : out(r&~m, c&~m) += W in(r, c), bits down
    if (W_ > 0) {
      for (int a = 0; a < n_; ++a) {
        const int ma = mask_of(a, n_);
        for (int c = 0; c < dim; ++c) {
          if (bit_of(c, a, n_) != 1) continue;
          const int c2 = c & ~ma;
          for (int r = 0; r < dim; ++r)
            if (bit_of(r, a, n_) == 1) out(r & ~ma, c2) += W_ * in(r, c);
        }
      }
    }
  } else {
    // sum_ab f_ab sp_a X sm_b : out(r&~ma, c&~mb) += f_ab in(r, c), bits down
    for (int a = 0; a < n_; ++a) {
      const int ma = mask_of(a, n_);
      for (int b = 0; b < n_; ++b) {
        const int mb = mask_of(b, n_);
        const double fab = couplings_.f(a, b);
        if (fab == 0.0) continue;
        for (int c = 0; c < dim; ++c) {
          if (bit_of(c, b, n_) != 1) continue;
          const int c2 = c & ~mb;
          for (int r = 0; r < dim; ++r)
            if (bit_of(r, a, n_) == 1) out(r & ~ma, c2) += fab * in(r, c);
        }
      }
    }
    if (W_ > 0) {
      for (int a = 0; a < n_; ++a) {
        const int ma = mask_of(a, n_);
        for (int c = 0; c < dim; ++c) {
          if (bit_of(c, a, n_) != 0) continue;
          const int c2 = c | ma;
          for (int r = 0; r < dim; ++r)
            if (bit_of(r, a, n_) == 0) out(r | ma, c2) += W_ * in(r, c);
        }
      }
    }
  }
}

void Liouvillian::apply(const DensityMatrix& rho, DensityMatrix& out) const {
  apply_impl(rho, out, false);
}

void Liouvillian::apply_adjoint(const DensityMatrix& x, DensityMatrix& out) const {
  apply_impl(x, out, true);
}

DensityMatrix Liouvillian::apply(const DensityMatrix& rho) const {
  DensityMatrix out;
  apply(rho, out);
  return out;
}

Eigen::MatrixXcd Liouvillian::dense_superoperator() const {
  const int dim = dim_;
  const long ld = static_cast<long>(dim) * dim;
  Eigen::MatrixXcd sop(ld, ld);
  DensityMatrix basis = DensityMatrix::Zero(dim, dim), img;
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r < dim; ++r) {
      basis(r, c) = 1.0;
      apply(basis, img);
      basis(r, c) = 0.0;
      const long col = static_cast<long>(c) * dim + r;  // column stacking
      for (int cc = 0; cc < dim; ++cc)
        sop.block(static_cast<long>(cc) * dim, col, dim, 1) = img.col(cc);
    }
  }
  return sop;
}

DensityMatrix all_down_density(int n) {
  const int dim = 1 << n;
  DensityMatrix rho = DensityMatrix::Zero(dim, dim);
  rho(dim - 1, dim - 1) = 1.0;
  return rho;
}

DensityMatrix all_up_density(int n) {
  const int dim = 1 << n;
  DensityMatrix rho = DensityMatrix::Zero(dim, dim);
  rho(0, 0) = 1.0;
  return rho;
}

DensityMatrix maximally_mixed(int n) {
  const int dim = 1 << n;
  return DensityMatrix::Identity(dim, dim) / static_cast<double>(dim);
}

namespace {

void pack_matrix(const DensityMatrix& m, Eigen::VectorXd& y) {
  const long sz = static_cast<long>(m.size());
  y.resize(2 * sz);
  std::memcpy(y.data(), m.data(), sizeof(double) * 2 * sz);
}

void unpack_matrix(const Eigen::VectorXd& y, DensityMatrix& m, int dim) {
  m.resize(dim, dim);
  std::memcpy(m.data(), y.data(), sizeof(double) * y.size());
}

}  // namespace

EvolveResult evolve(const DensityMatrix& rho0, const Liouvillian& liouv,
                    std::span<const double> t_grid, const EvolveOptions& opt) {
  const int dim = liouv.dim();
  if (rho0.rows() != dim || rho0.cols() != dim)
    throw std::invalid_argument("evolve: state dimension mismatch");

  DensityMatrix work(dim, dim), dwork(dim, dim);
  Eigen::VectorXd y;
  pack_matrix(rho0, y);
  const double tr0 = rho0.trace().real();

  auto rhs = [&](double, const Eigen::VectorXd& yy, Eigen::VectorXd& dydt) {
    unpack_matrix(yy, work, dim);
    liouv.apply(work, dwork);
    pack_matrix(dwork, dydt);
  };

  EvolveResult res;
  auto observer = [&](double t, const Eigen::VectorXd& yy) {
    DensityMatrix m;
    unpack_matrix(yy, m, dim);
    res.max_trace_drift = std::max(res.max_trace_drift, std::abs(m.trace().real() - tr0));
    res.t.push_back(t);
    res.states.push_back(std::move(m));
  };

  if (t_grid.empty()) throw std::invalid_argument("evolve: empty time grid");
  double t1 = t_grid.back();
  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  oo.steady_tol = opt.steady_tol;
  OdeStatus st = integrate_dopri5(rhs, y, 0.0, t1, oo, t_grid, observer);
  res.steady = st.steady;
  if (res.t.empty() || res.t.back() < st.t_end) {
    DensityMatrix m;
    unpack_matrix(y, m, dim);
    res.t.push_back(st.t_end);
    res.states.push_back(std::move(m));
  }
  return res;
}

SteadyStateResult steady_state(const Liouvillian& liouv, const SteadyStateOptions& opt) {
  const int dim = liouv.dim();
  DensityMatrix rho = all_down_density(liouv.sites());
  DensityMatrix work(dim, dim), dwork(dim, dim);
  Eigen::VectorXd y;
  pack_matrix(rho, y);
  auto rhs = [&](double, const Eigen::VectorXd& yy, Eigen::VectorXd& dydt) {
    unpack_matrix(yy, work, dim);
    liouv.apply(work, dwork);
    pack_matrix(dwork, dydt);
  };
  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  oo.steady_tol = opt.drift_tol;
  OdeStatus st = integrate_dopri5(rhs, y, 0.0, opt.t_max, oo);
  SteadyStateResult res;
  unpack_matrix(y, res.rho, dim);
  liouv.apply(res.rho, dwork);
  res.drift = dwork.cwiseAbs().maxCoeff();
  res.converged = st.steady;
  res.t_end = st.t_end;
  if (!res.converged)
    throw std::runtime_error("steady_state: drift " + std::to_string(res.drift) +
                             " above tolerance after t = " + std::to_string(st.t_end));
  return res;
}

DensityMatrix steady_state_nullspace(const Liouvillian& liouv) {
  const int n = liouv.sites();
  if (n > 6) throw std::invalid_argument("steady_state_nullspace: N <= 6 only");
  const int dim = liouv.dim();
  const long ld = static_cast<long>(dim) * dim;
  Eigen::MatrixXcd sop = liouv.dense_superoperator();
  // replace the first row by the trace functional; solve for trace 1
  for (long k = 0; k < ld; ++k) sop(0, k) = 0.0;
  for (int r = 0; r < dim; ++r) sop(0, static_cast<long>(r) * dim + r) = 1.0;
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(ld);
  rhs[0] = 1.0;
  Eigen::VectorXcd v = Eigen::PartialPivLU<Eigen::MatrixXcd>(sop).solve(rhs);
  DensityMatrix rho(dim, dim);
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r < dim; ++r) rho(r, c) = v[static_cast<long>(c) * dim + r];
  // symmetrize away the solver's rounding asymmetry
  rho = 0.5 * (rho + rho.adjoint().eval());
  return rho;
}

std::vector<std::complex<double>> two_time_exact(const DensityMatrix& rho,
                                                 const Liouvillian& liouv, int a, int b,
                                                 std::span<const double> tau_grid,
                                                 const EvolveOptions& opt) {
  const int n = liouv.sites(), dim = liouv.dim();
  if (a < 0 || a >= n || b >= n) throw std::invalid_argument("two_time_exact: bad site index");
  const int ma = mask_of(a, n);
  DensityMatrix x0 = DensityMatrix::Zero(dim, dim);
  // X0 = (sm_a + sm_b) rho ; sm on the left: row r|m gets row r (bit up)
  for (int r = 0; r < dim; ++r)
    if (bit_of(r, a, n) == 0) x0.row(r | ma) += rho.row(r);
  if (b >= 0) {
    const int mb = mask_of(b, n);
    for (int r = 0; r < dim; ++r)
      if (bit_of(r, b, n) == 0) x0.row(r | mb) += rho.row(r);
  }

  auto trace_sp = [&](const DensityMatrix& x) {
    // Tr[(sp_a + sp_b) X] = sum_{s: bit_a up} X(s|ma, s) (+ same for b)
    std::complex<double> z = 0.0;
    for (int s = 0; s < dim; ++s)
      if (bit_of(s, a, n) == 0) z += x(s | ma, s);
    if (b >= 0) {
      const int mb = mask_of(b, n);
      for (int s = 0; s < dim; ++s)
        if (bit_of(s, b, n) == 0) z += x(s | mb, s);
    }
    return z;
  };

  std::vector<std::complex<double>> out;
  out.reserve(tau_grid.size());
  if (!tau_grid.empty() && tau_grid.front() == 0.0) {
    out.push_back(trace_sp(x0));
    tau_grid = tau_grid.subspan(1);
  }
  if (tau_grid.empty()) return out;

  DensityMatrix work(dim, dim), dwork(dim, dim);
  Eigen::VectorXd y;
  pack_matrix(x0, y);
  auto rhs = [&](double, const Eigen::VectorXd& yy, Eigen::VectorXd& dydt) {
    unpack_matrix(yy, work, dim);
    liouv.apply(work, dwork);
    pack_matrix(dwork, dydt);
  };
  auto observer = [&](double t, const Eigen::VectorXd& yy) {
    if (t == 0.0) return;
    DensityMatrix m;
    unpack_matrix(yy, m, dim);
    out.push_back(trace_sp(m));
  };
  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  integrate_dopri5(rhs, y, 0.0, tau_grid.back(), oo, tau_grid, observer);
  return out;
}

double expect_sz(const DensityMatrix& rho, int site) {
  const int dim = static_cast<int>(rho.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  double s = 0;
  for (int r = 0; r < dim; ++r) s += (bit_of(r, site, n) == 0 ? 1.0 : -1.0) * rho(r, r).real();
  return s;
}

double mean_sz(const DensityMatrix& rho) {
  const int dim = static_cast<int>(rho.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  double s = 0;
  for (int a = 0; a < n; ++a) s += expect_sz(rho, a);
  return s / n;
}

std::complex<double> expect_sp(const DensityMatrix& rho, int site) {
  const int dim = static_cast<int>(rho.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int m = mask_of(site, n);
  std::complex<double> z = 0;
  // Tr(rho sp) = sum_{s: bit up} rho(s|m, s)
  for (int s = 0; s < dim; ++s)
    if (bit_of(s, site, n) == 0) z += rho(s | m, s);
  return z;
}

std::complex<double> pair_correlator_pm(const DensityMatrix& rho, int a, int b) {
  const int dim = static_cast<int>(rho.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int ma = mask_of(a, n), mb = mask_of(b, n);
  std::complex<double> z = 0;
  for (int s = 0; s < dim; ++s)
    if (bit_of(s, a, n) == 1 && bit_of(s, b, n) == 0) z += rho(s, (s | mb) & ~ma);
  return z;
}

Eigen::Matrix4cd pair_reduced_state(const DensityMatrix& rho, int a, int b) {
  const int dim = static_cast<int>(rho.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int ma = mask_of(a, n), mb = mask_of(b, n);
  Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
  for (int r = 0; r < dim; ++r) {
    const int u = 2 * bit_of(r, a, n) + bit_of(r, b, n);
    const int base = r & ~(ma | mb);
    for (int va = 0; va < 2; ++va)
      for (int vb = 0; vb < 2; ++vb) {
        const int c = base | (va ? ma : 0) | (vb ? mb : 0);
        out(u, 2 * va + vb) += rho(r, c);
      }
  }
  return out;
}

Eigen::Matrix2cd single_reduced_state(const DensityMatrix& rho, int a) {
  const int dim = static_cast<int>(rho.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int ma = mask_of(a, n);
  Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
  for (int r = 0; r < dim; ++r) {
    const int u = bit_of(r, a, n);
    const int base = r & ~ma;
    for (int v = 0; v < 2; ++v) out(u, v) += rho(r, base | (v ? ma : 0));
  }
  return out;
}

void check_density_matrix(const DensityMatrix& rho, double herm_tol, double trace_tol,
                          double eig_tol) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > herm_tol)
    throw std::runtime_error("density matrix not Hermitian within tolerance");
  if (std::abs(rho.trace().real() - 1.0) > trace_tol || std::abs(rho.trace().imag()) > trace_tol)
    throw std::runtime_error("density matrix trace deviates from 1");
  Eigen::SelfAdjointEigenSolver<DensityMatrix> es(0.5 * (rho + rho.adjoint().eval()),
                                                  Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -eig_tol)
    throw std::runtime_error("density matrix has eigenvalue below -tolerance: " +
                             std::to_string(es.eigenvalues().minCoeff()));
}

void write_density_binary(const DensityMatrix& rho, const std::filesystem::path& path) {
  std::string out;
  const char magic[4] = {'R', 'S', 'D', 'M'};
  std::uint32_t version = 1, dim = static_cast<std::uint32_t>(rho.rows());
  out.append(magic, 4);
  out.append(reinterpret_cast<const char*>(&version), 4);
  out.append(reinterpret_cast<const char*>(&dim), 4);
  // row-major complex doubles
  for (std::uint32_t r = 0; r < dim; ++r)
    for (std::uint32_t c = 0; c < dim; ++c) {
      double re = rho(r, c).real(), im = rho(r, c).imag();
      out.append(reinterpret_cast<const char*>(&re), 8);
      out.append(reinterpret_cast<const char*>(&im), 8);
    }
  atomic_write_file(path, out);
}

DensityMatrix read_density_binary(const std::filesystem::path& path) {
  std::string in = read_file(path);
  if (in.size() < 12 || std::memcmp(in.data(), "RSDM", 4) != 0)
    throw std::runtime_error("read_density_binary: bad header in " + path.string());
  std::uint32_t version, dim;
  std::memcpy(&version, in.data() + 4, 4);
  std::memcpy(&dim, in.data() + 8, 4);
  if (version != 1) throw std::runtime_error("read_density_binary: unknown version");
  if (in.size() != 12 + 16ull * dim * dim)
    throw std::runtime_error("read_density_binary: size mismatch");
  DensityMatrix rho(dim, dim);
  const char* p = in.data() + 12;
  for (std::uint32_t r = 0; r < dim; ++r)
    for (std::uint32_t c = 0; c < dim; ++c) {
      double re, im;
      std::memcpy(&re, p, 8);
      p += 8;
      std::memcpy(&im, p, 8);
      p += 8;
      rho(r, c) = {re, im};
    }
  return rho;
}

void write_density_csv(const DensityMatrix& rho, const std::filesystem::path& path) {
  Eigen::MatrixXd stacked(2 * rho.rows(), rho.cols());
  stacked.topRows(rho.rows()) = rho.real();
  stacked.bottomRows(rho.rows()) = rho.imag();
  write_matrix_csv(stacked, path);
}

}  // namespace radsync
