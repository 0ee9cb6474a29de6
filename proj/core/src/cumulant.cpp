#include "radsync/cumulant.hpp"

#include <cmath>
#include <stdexcept>

#include "radsync/ode.hpp"

namespace radsync {

using cd = std::complex<double>;

CumulantState CumulantState::all_down(int n) {
  CumulantState st;
  st.n = n;
  st.s = Eigen::VectorXd::Constant(n, -1.0);
  st.p = Eigen::VectorXcd::Zero(n);
  st.P = Eigen::MatrixXcd::Zero(n, n);
  st.Q = Eigen::MatrixXcd::Zero(n, n);
  st.zz = Eigen::MatrixXd::Ones(n, n);
  st.zz.diagonal().setZero();
  st.R = Eigen::MatrixXcd::Zero(n, n);
  return st;
}

CumulantState CumulantState::from_density_matrix(const DensityMatrix& rho) {
  const int dim = static_cast<int>(rho.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  if (n > 8) throw std::invalid_argument("from_density_matrix: N <= 8");
  CumulantState st = all_down(n);
  auto bit = [&](int s, int a) { return (s >> (n - 1 - a)) & 1; };
  auto mask = [&](int a) { return 1 << (n - 1 - a); };
  for (int a = 0; a < n; ++a) {
    st.s[a] = expect_sz(rho, a);
    st.p[a] = expect_sp(rho, a);
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      st.P(a, b) = pair_correlator_pm(rho, a, b);
      cd q = 0, r = 0;
      double z = 0;
      for (int s2 = 0; s2 < dim; ++s2) {
        // tr(rho sp_a sp_b): rows with both sites down map to both up
        if (bit(s2, a) == 1 && bit(s2, b) == 1) q += rho(s2, (s2 & ~mask(a)) & ~mask(b));
        // tr(rho sp_a sz_b)
        if (bit(s2, a) == 1)
          r += rho(s2, s2 & ~mask(a)) * (bit(s2, b) == 0 ? 1.0 : -1.0);
        // tr(rho sz_a sz_b)
        z += (bit(s2, a) == 0 ? 1.0 : -1.0) * (bit(s2, b) == 0 ? 1.0 : -1.0) *
             rho(s2, s2).real();
      }
      st.Q(a, b) = q;
      st.R(a, b) = r;
      st.zz(a, b) = z;
    }
  return st;
}

bool CumulantState::u1_compatible(double tol) const {
  return p.cwiseAbs().maxCoeff() <= tol && Q.cwiseAbs().maxCoeff() <= tol &&
         R.cwiseAbs().maxCoeff() <= tol;
}

double CumulantState::max_abs() const {
  double m = s.cwiseAbs().maxCoeff();
  m = std::max(m, p.cwiseAbs().maxCoeff());
  m = std::max(m, P.cwiseAbs().maxCoeff());
  m = std::max(m, Q.cwiseAbs().maxCoeff());
  m = std::max(m, zz.cwiseAbs().maxCoeff());
  m = std::max(m, R.cwiseAbs().maxCoeff());
  return m;
}

namespace {

struct Workspace {
  // closure terms; x,y,z всегда distinct sites
  const CumulantState& st;
  Eigen::VectorXcd pb;  // conj(p)

  explicit Workspace(const CumulantState& s) : st(s), pb(s.p.conjugate()) {}

  // <sp_x sm_y sz_z>
  cd T(int x, int y, int z) const {
    return st.P(x, y) * st.s[z] + st.R(x, z) * pb[y] + std::conj(st.R(y, z)) * st.p[x] -
           2.0 * st.p[x] * pb[y] * st.s[z];
  }
  // <sp_c sp_b sz_a>
  cd U(int c, int b, int a) const {
    return st.Q(c, b) * st.s[a] + st.R(c, a) * st.p[b] + st.R(b, a) * st.p[c] -
           2.0 * st.p[c] * st.p[b] * st.s[a];
  }
  // <sp_c sz_a sz_b>
  cd V(int c, int a, int b) const {
    return st.R(c, a) * st.s[b] + st.R(c, b) * st.s[a] + st.zz(a, b) * st.p[c] -
           2.0 * st.p[c] * st.s[a] * st.s[b];
  }
  // <sp_a sp_b sm_c>
  cd Wm(int a, int b, int c) const {
    return st.Q(a, b) * pb[c] + st.P(a, c) * st.p[b] + st.P(b, c) * st.p[a] -
           2.0 * st.p[a] * st.p[b] * pb[c];
  }
};

}  // namespace

void cumulant_derivatives(const CumulantState& st, const CouplingMatrices& cm, double W,
                          const DipoleArray& array, CumulantState& out) {
  const int n = st.n;
  if (cm.size() != n || array.size() != n)
    throw std::invalid_argument("cumulant_derivatives: size mismatch");
  const Eigen::MatrixXd& f = cm.f;
  const Eigen::MatrixXd& g = cm.g;
  const auto& delta = array.detunings;

  out.n = n;
  out.s.resize(n);
  out.p.resize(n);
  out.P.setZero(n, n);
  out.Q.setZero(n, n);
  out.zz.setZero(n, n);
  out.R.setZero(n, n);

  Workspace w(st);

  for (int a = 0; a < n; ++a) {
    // per-site decay rate from the coupling-matrix diagonal
    const double ga = f(a, a);
    double dsa = -ga * (1.0 + st.s[a]) + W * (1.0 - st.s[a]);
    cd dpa = (cd(0.0, delta[a]) - 0.5 * (ga + W)) * st.p[a];
    for (int j = 0; j < n; ++j) {
      if (j == a) continue;
      dsa += -2.0 * f(a, j) * st.P(a, j).real() + 2.0 * g(a, j) * st.P(a, j).imag();
      dpa += 0.5 * cd(f(a, j), -g(a, j)) * st.R(j, a);
    }
    out.s[a] = dsa;
    out.p[a] = dpa;
  }

  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const double fab = f(a, b), gab = g(a, b);
      const double ga = f(a, a), gb = f(b, b);

      cd dP = (cd(0.0, delta[a] - delta[b]) - 0.5 * (ga + gb) - W) * st.P(a, b) +
              0.25 * fab * (st.s[a] + st.s[b] + 2.0 * st.zz(a, b)) +
              cd(0.0, 0.25 * gab) * (st.s[b] - st.s[a]);
      cd dQ = (cd(0.0, delta[a] + delta[b]) - 0.5 * (ga + gb) - W) * st.Q(a, b);
      double dzz = -ga * (st.s[b] + st.zz(a, b)) - gb * (st.s[a] + st.zz(a, b)) +
                   W * (st.s[a] + st.s[b] - 2.0 * st.zz(a, b)) + 4.0 * fab * st.P(a, b).real();
      cd dR = (cd(0.0, delta[a]) - 0.5 * ga - gb - 1.5 * W) * st.R(a, b) + (W - gb) * st.p[a] -
              fab * st.R(b, a) - 0.5 * cd(fab, gab) * st.p[b];

      for (int c = 0; c < n; ++c) {
        if (c == a || c == b) continue;
        const double fac = f(a, c), gac = g(a, c);
        const double fbc = f(b, c), gbc = g(b, c);
        dP += 0.5 * cd(fac, -gac) * w.T(c, b, a) + 0.5 * cd(fbc, gbc) * w.T(a, c, b);
        dQ += 0.5 * cd(fac, -gac) * w.U(c, b, a) + 0.5 * cd(fbc, -gbc) * w.U(c, a, b);
        cd tacb = w.T(a, c, b), tbca = w.T(b, c, a);
        dzz += -2.0 * fac * tacb.real() - 2.0 * fbc * tbca.real() + 2.0 * gac * tacb.imag() +
               2.0 * gbc * tbca.imag();
        dR += 0.5 * cd(fac, -gac) * w.V(c, a, b) - cd(fbc, gbc) * w.Wm(a, b, c) -
              cd(fbc, -gbc) * w.Wm(c, a, b);
      }
      out.P(a, b) = dP;
      out.Q(a, b) = dQ;
      out.zz(a, b) = dzz;
      out.R(a, b) = dR;
    }
  }
}

namespace {

// U(1)-reduced flow on {s, P, zz}; p, Q, R identically zero. Matrix products
// carry the closure sums, O(N^3) through gemm.
struct U1Rhs {
  int n;
  double W;
  Eigen::MatrixXd foff, goff;  // zero diagonals
  Eigen::VectorXd delta, gdiag;
  Eigen::MatrixXcd K;  // f - i g, zero diagonal

  U1Rhs(const CouplingMatrices& cm, double repump, const DipoleArray& array)
      : n(cm.size()), W(repump) {
    foff = cm.f;
    foff.diagonal().setZero();
    goff = cm.g;
    goff.diagonal().setZero();
    gdiag = cm.f.diagonal();
    delta = Eigen::Map<const Eigen::VectorXd>(array.detunings.data(), n);
    K = foff.cast<cd>() - cd(0, 1) * goff.cast<cd>();
  }

  std::size_t size() const { return n + 3 * n * n; }  // s, Re P, Im P, zz

  void pack(const CumulantState& st, Eigen::VectorXd& y) const {
    y.resize(size());
    Eigen::Map<Eigen::VectorXd>(y.data(), n) = st.s;
    Eigen::Map<Eigen::MatrixXd>(y.data() + n, n, n) = st.P.real();
    Eigen::Map<Eigen::MatrixXd>(y.data() + n + n * n, n, n) = st.P.imag();
    Eigen::Map<Eigen::MatrixXd>(y.data() + n + 2 * n * n, n, n) = st.zz;
  }

  void unpack(const Eigen::VectorXd& y, CumulantState& st) const {
    st.n = n;
    st.s = y.segment(0, n);
    st.P = Eigen::Map<const Eigen::MatrixXd>(y.data() + n, n, n).cast<cd>() +
           cd(0, 1) * Eigen::Map<const Eigen::MatrixXd>(y.data() + n + n * n, n, n).cast<cd>();
    st.zz = Eigen::Map<const Eigen::MatrixXd>(y.data() + n + 2 * n * n, n, n);
    st.p = Eigen::VectorXcd::Zero(n);
    st.Q = Eigen::MatrixXcd::Zero(n, n);
    st.R = Eigen::MatrixXcd::Zero(n, n);
    st.P.diagonal().setZero();
    st.zz.diagonal().setZero();
  }

  void operator()(double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
    Eigen::Map<const Eigen::VectorXd> s(y.data(), n);
    Eigen::Map<const Eigen::MatrixXd> Pr(y.data() + n, n, n);
    Eigen::Map<const Eigen::MatrixXd> Pi(y.data() + n + n * n, n, n);
    Eigen::Map<const Eigen::MatrixXd> zz(y.data() + n + 2 * n * n, n, n);
    dy.resize(size());
    Eigen::Map<Eigen::VectorXd> ds(dy.data(), n);
    Eigen::Map<Eigen::MatrixXd> dPr(dy.data() + n, n, n);
    Eigen::Map<Eigen::MatrixXd> dPi(dy.data() + n + n * n, n, n);
    Eigen::Map<Eigen::MatrixXd> dzz(dy.data() + n + 2 * n * n, n, n);

    Eigen::MatrixXcd P = Pr.cast<cd>() + cd(0, 1) * Pi.cast<cd>();
    P.diagonal().setZero();

    // singles
    Eigen::VectorXd fP = (foff.array() * Pr.array()).rowwise().sum();
    Eigen::VectorXd gP = (goff.array() * Pi.array()).rowwise().sum();
    ds = (-gdiag.array() * (1.0 + s.array()) + W * (1.0 - s.array())).matrix() - 2.0 * fP +
         2.0 * gP;

    // pairs: dP = coeff + 0.5 diag(s) (K P) + 0.5 (P conj(K)) diag(s)
    Eigen::MatrixXcd KP = K * P;
    Eigen::MatrixXcd PK = P * K.conjugate();
    Eigen::MatrixXcd dP(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (a == b) {
          dP(a, b) = 0;
          continue;
        }
        cd v = (cd(0.0, delta[a] - delta[b]) - 0.5 * (gdiag[a] + gdiag[b]) - W) * P(a, b) +
               0.25 * foff(a, b) * (s[a] + s[b] + 2.0 * zz(a, b)) +
               cd(0.0, 0.25 * goff(a, b)) * (s[b] - s[a]);
        // the excluded c = a, b terms vanish through the zero diagonals of K, P
        v += 0.5 * s[a] * KP(a, b);
        v += 0.5 * s[b] * PK(a, b);
        dP(a, b) = v;
      }
    dPr = dP.real();
    dPi = dP.imag();

    // zz pairs
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (a == b) {
          dzz(a, b) = 0;
          continue;
        }
        double v = -gdiag[a] * (s[b] + zz(a, b)) - gdiag[b] * (s[a] + zz(a, b)) +
                   W * (s[a] + s[b] - 2.0 * zz(a, b)) + 4.0 * foff(a, b) * Pr(a, b);
        // sum_{c != a,b} of -2 f_ac Re P_ac s_b + 2 g_ac Im P_ac s_b + (a<->b)
        double ta = fP[a] - foff(a, b) * Pr(a, b);
        double tb = fP[b] - foff(a, b) * Pr(b, a);
        double ua = gP[a] - goff(a, b) * Pi(a, b);
        double ub = gP[b] - goff(a, b) * Pi(b, a);
        v += s[b] * (-2.0 * ta + 2.0 * ua) + s[a] * (-2.0 * tb + 2.0 * ub);
        dzz(a, b) = v;
      }
  }
};

// full-set packing: s, p, P, Q, zz, R
struct FullRhs {
  int n;
  const CouplingMatrices& cm;
  double W;
  const DipoleArray& array;
  mutable CumulantState st, dst;

  FullRhs(const CouplingMatrices& c, double repump, const DipoleArray& a)
      : n(c.size()), cm(c), W(repump), array(a) {
    st = CumulantState::all_down(n);
    dst = st;
  }

  std::size_t size() const { return std::size_t(n) * (3 + 7 * n); }

  void pack(const CumulantState& x, Eigen::VectorXd& y) const {
    y.resize(size());
    double* q = y.data();
    Eigen::Map<Eigen::VectorXd>(q, n) = x.s;
    q += n;
    Eigen::Map<Eigen::VectorXd>(q, n) = x.p.real();
    q += n;
    Eigen::Map<Eigen::VectorXd>(q, n) = x.p.imag();
    q += n;
    auto putc = [&](const Eigen::MatrixXcd& m) {
      Eigen::Map<Eigen::MatrixXd>(q, n, n) = m.real();
      q += n * n;
      Eigen::Map<Eigen::MatrixXd>(q, n, n) = m.imag();
      q += n * n;
    };
    putc(x.P);
    putc(x.Q);
    putc(x.R);
    Eigen::Map<Eigen::MatrixXd>(q, n, n) = x.zz;
  }

  void unpack(const Eigen::VectorXd& y, CumulantState& x) const {
    x.n = n;
    const double* q = y.data();
    x.s = Eigen::Map<const Eigen::VectorXd>(q, n);
    q += n;
    Eigen::VectorXd pr = Eigen::Map<const Eigen::VectorXd>(q, n);
    q += n;
    Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(q, n);
    q += n;
    x.p = pr.cast<cd>() + cd(0, 1) * pi.cast<cd>();
    auto getc = [&](Eigen::MatrixXcd& m) {
      Eigen::MatrixXd re = Eigen::Map<const Eigen::MatrixXd>(q, n, n);
      q += n * n;
      Eigen::MatrixXd im = Eigen::Map<const Eigen::MatrixXd>(q, n, n);
      q += n * n;
      m = re.cast<cd>() + cd(0, 1) * im.cast<cd>();
      m.diagonal().setZero();
    };
    getc(x.P);
    getc(x.Q);
    getc(x.R);
    x.zz = Eigen::Map<const Eigen::MatrixXd>(q, n, n);
    x.zz.diagonal().setZero();
  }

  void operator()(double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
    unpack(y, st);
    cumulant_derivatives(st, cm, W, array, dst);
    pack(dst, dy);
  }
};

}  // namespace

CumulantSeries evolve_cumulant(const CumulantState& initial, const CouplingMatrices& cm,
                               double repump, const DipoleArray& array,
                               std::span<const double> t_grid, const CumulantOptions& opt) {
  if (t_grid.empty()) throw std::invalid_argument("evolve_cumulant: empty grid");
  const bool u1 = opt.u1_reduction;
  if (u1 && !initial.u1_compatible(1e-14))
    throw std::invalid_argument("evolve_cumulant: u1 reduction requires p = Q = R = 0");

  CumulantSeries series;
  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  oo.steady_tol = opt.steady_tol;

  if (u1) {
    U1Rhs rhs(cm, repump, array);
    Eigen::VectorXd y;
    rhs.pack(initial, y);
    auto observer = [&](double t, const Eigen::VectorXd& yy) {
      CumulantState x;
      rhs.unpack(yy, x);
      series.t.push_back(t);
      series.states.push_back(std::move(x));
    };
    OdeStatus st = integrate_dopri5(rhs, y, 0.0, t_grid.back(), oo, t_grid, observer);
    series.steady = st.steady;
    if (series.t.empty() || series.t.back() < st.t_end) {
      CumulantState x;
      rhs.unpack(y, x);
      series.t.push_back(st.t_end);
      series.states.push_back(std::move(x));
    }
  } else {
    FullRhs rhs(cm, repump, array);
    Eigen::VectorXd y;
    rhs.pack(initial, y);
    auto observer = [&](double t, const Eigen::VectorXd& yy) {
      CumulantState x;
      rhs.unpack(yy, x);
      series.t.push_back(t);
      series.states.push_back(std::move(x));
    };
    OdeStatus st = integrate_dopri5(rhs, y, 0.0, t_grid.back(), oo, t_grid, observer);
    series.steady = st.steady;
    if (series.t.empty() || series.t.back() < st.t_end) {
      CumulantState x;
      rhs.unpack(y, x);
      series.t.push_back(st.t_end);
      series.states.push_back(std::move(x));
    }
  }
  return series;
}

CumulantSteadyResult steady_cumulant(const CouplingMatrices& cm, double repump,
                                     const DipoleArray& array, const CumulantOptions& opt) {
  CumulantOptions o = opt;
  // the moment-derivative floor sits near (rate scale) x (local error), so the
  // integrator runs tighter than the drift criterion
  if (o.steady_tol <= 0) o.steady_tol = 1e-8;
  o.rtol = std::min(o.rtol, 1e-10);
  o.atol = std::min(o.atol, 1e-13);
  std::vector<double> grid{o.t_max};
  CumulantSeries s = evolve_cumulant(CumulantState::all_down(cm.size()), cm, repump, array,
                                     grid, o);
  CumulantSteadyResult res;
  res.state = s.states.back();
  res.t_end = s.t.back();
  res.converged = s.steady;
  CumulantState d;
  cumulant_derivatives(res.state, cm, repump, array, d);
  res.drift = d.max_abs();
  if (!res.converged)
    throw std::runtime_error("steady_cumulant: drift " + std::to_string(res.drift) +
                             " above tolerance after t = " + std::to_string(res.t_end));
  return res;
}

namespace {

ZqValue zq_from_sum(cd total, long pairs) {
  ZqValue z;
  cd avg = total / static_cast<double>(pairs);
  z.raw_re = avg.real();
  z.imag_residual = std::abs(avg.imag());
  z.zq = avg.real() > 0 ? std::sqrt(avg.real()) : 0.0;
  return z;
}

}  // namespace

ZqValue zq_all(const CumulantState& st) {
  const int n = st.n;
  if (n < 2) throw std::invalid_argument("zq_all: N >= 2");
  cd total = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) total += st.P(a, b);
  return zq_from_sum(total, static_cast<long>(n) * (n - 1));
}

ZqValue zq_cluster(const CumulantState& st, int d, const DipoleArray& array) {
  const int n = st.n;
  const int c0 = central_site(array);
  if (d < 2 || c0 + d > n)
    throw std::invalid_argument("zq_cluster: cluster size out of range (d=" + std::to_string(d) +
                                ", start=" + std::to_string(c0) + ", N=" + std::to_string(n) + ")");
  cd total = 0;
  for (int a = c0; a < c0 + d; ++a)
    for (int b = c0; b < c0 + d; ++b)
      if (a != b) total += st.P(a, b);
  return zq_from_sum(total, static_cast<long>(d) * (d - 1));
}

namespace {

// Linear regression system for v_j(tau) = <sp_j(t+tau) sm_b(t)>:
// dv_j/dtau = (i delta_j - (gam+W)/2) v_j + (s_j/2) sum_{k != j} (f_jk - i g_jk) v_k
Eigen::MatrixXcd regression_matrix(const CumulantState& steady, const CouplingMatrices& cm,
                                   const DipoleArray& array, double W) {
  const int n = steady.n;
  Eigen::MatrixXcd A(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (j == k) {
        A(j, k) = cd(-0.5 * (array.gamma + W), array.detunings[j]);
      } else {
        A(j, k) = 0.5 * steady.s[j] * cd(cm.f(j, k), -cm.g(j, k));
      }
    }
  }
  return A;
}

// propagate v(tau) = exp(A tau) v0 for the given initial vectors on the grid;
// eigendecomposition path with an ODE fallback when ill-conditioned.
std::vector<std::vector<Eigen::VectorXcd>> propagate_linear(
    const Eigen::MatrixXcd& A, const std::vector<Eigen::VectorXcd>& v0s,
    std::span<const double> tau_grid) {
  const int n = static_cast<int>(A.rows());
  std::vector<std::vector<Eigen::VectorXcd>> out(v0s.size());

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A);
  bool ok = es.info() == Eigen::Success;
  Eigen::MatrixXcd Vm, Vi;
  if (ok) {
    Vm = es.eigenvectors();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Vm);
    Vi = lu.solve(Eigen::MatrixXcd::Identity(n, n));
    double resid = (Vm * Vi - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
    ok = resid < 1e-8;
  }
  if (ok) {
    const auto& lam = es.eigenvalues();
    for (std::size_t i = 0; i < v0s.size(); ++i) {
      Eigen::VectorXcd w = Vi * v0s[i];
      out[i].reserve(tau_grid.size());
      for (double tau : tau_grid) {
        Eigen::VectorXcd phase(n);
        for (int k = 0; k < n; ++k) phase[k] = std::exp(lam[k] * tau) * w[k];
        out[i].push_back(Vm * phase);
      }
    }
    return out;
  }

  // fallback: direct integration (packs complex into real)
  for (std::size_t i = 0; i < v0s.size(); ++i) {
    Eigen::VectorXd y(2 * n);
    y.segment(0, n) = v0s[i].real();
    y.segment(n, n) = v0s[i].imag();
    auto rhs = [&](double, const Eigen::VectorXd& yy, Eigen::VectorXd& dy) {
      Eigen::VectorXcd v = yy.segment(0, n).cast<cd>() + cd(0, 1) * yy.segment(n, n).cast<cd>();
      Eigen::VectorXcd dv = A * v;
      dy.resize(2 * n);
      dy.segment(0, n) = dv.real();
      dy.segment(n, n) = dv.imag();
    };
    auto& series = out[i];
    auto observer = [&](double t, const Eigen::VectorXd& yy) {
      if (t == 0.0 && !tau_grid.empty() && tau_grid.front() != 0.0) return;
      series.push_back(yy.segment(0, n).cast<cd>() + cd(0, 1) * yy.segment(n, n).cast<cd>());
    };
    OdeOptions oo;
    oo.rtol = 1e-10;
    oo.atol = 1e-13;
    Eigen::VectorXd yy = y;
    integrate_dopri5(rhs, yy, 0.0, tau_grid.back(), oo, tau_grid, observer);
    while (series.size() > tau_grid.size()) series.pop_back();
  }
  return out;
}

Eigen::VectorXcd regression_initial(const CumulantState& steady, int b) {
  const int n = steady.n;
  Eigen::VectorXcd v0(n);
  for (int j = 0; j < n; ++j)
    v0[j] = j == b ? cd(0.5 * (1.0 + steady.s[b]), 0.0) : steady.P(j, b);
  return v0;
}

}  // namespace

std::vector<cd> two_time_cumulant(const CumulantState& steady, const CouplingMatrices& cm,
                                  const DipoleArray& array, double repump, int a, int b,
                                  std::span<const double> tau_grid) {
  const int n = steady.n;
  if (a < 0 || a >= n || b < 0 || b >= n || a == b)
    throw std::invalid_argument("two_time_cumulant: bad pair");
  Eigen::MatrixXcd A = regression_matrix(steady, cm, array, repump);
  std::vector<Eigen::VectorXcd> v0s{regression_initial(steady, b), regression_initial(steady, a)};
  auto prop = propagate_linear(A, v0s, tau_grid);
  std::vector<cd> out(tau_grid.size());
  for (std::size_t i = 0; i < tau_grid.size(); ++i)
    out[i] = prop[0][i][a] + prop[0][i][b] + prop[1][i][a] + prop[1][i][b];
  return out;
}

std::vector<std::vector<cd>> two_time_cumulant_all(const CumulantState& steady,
                                                   const CouplingMatrices& cm,
                                                   const DipoleArray& array, double repump,
                                                   int a, std::span<const int> partners,
                                                   std::span<const double> tau_grid) {
  const int n = steady.n;
  Eigen::MatrixXcd A = regression_matrix(steady, cm, array, repump);
  std::vector<Eigen::VectorXcd> v0s;
  v0s.reserve(partners.size() + 1);
  v0s.push_back(regression_initial(steady, a));
  for (int b : partners) {
    if (b < 0 || b >= n) throw std::invalid_argument("two_time_cumulant_all: bad partner");
    v0s.push_back(regression_initial(steady, b));
  }
  auto prop = propagate_linear(A, v0s, tau_grid);
  std::vector<std::vector<cd>> out(partners.size());
  for (std::size_t ib = 0; ib < partners.size(); ++ib) {
    const int b = partners[ib];
    out[ib].resize(tau_grid.size());
    for (std::size_t i = 0; i < tau_grid.size(); ++i)
      out[ib][i] = prop[ib + 1][i][a] + prop[ib + 1][i][b] + prop[0][i][a] + prop[0][i][b];
  }
  return out;
}

}  // namespace radsync
