#include "radsync/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <stdexcept>

#include "radsync/ode.hpp"
#include "radsync/util.hpp"

namespace radsync {

BlochState BlochState::zero(int n) {
  BlochState s;
  s.sx = Eigen::ArrayXd::Zero(n);
  s.sy = Eigen::ArrayXd::Zero(n);
  s.sz = Eigen::ArrayXd::Zero(n);
  return s;
}

BlochState BlochState::all_down(int n) {
  BlochState s = zero(n);
  s.sz.setConstant(-0.5);
  return s;
}

BlochState BlochState::all_up(int n) {
  BlochState s = zero(n);
  s.sz.setConstant(0.5);
  return s;
}

BlochState BlochState::random_phases(int n, std::uint64_t seed, double eps) {
  BlochState s = zero(n);
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  const double sp = 0.5 * (1.0 - eps);
  for (int a = 0; a < n; ++a) {
    double phi = u(rng);
    s.sx[a] = sp * std::cos(phi);
    s.sy[a] = sp * std::sin(phi);
  }
  return s;
}

double BlochState::max_norm() const {
  return std::sqrt((sx.square() + sy.square() + sz.square()).maxCoeff());
}

DetuningDistribution DetuningDistribution::lorentzian(double delta) {
  DetuningDistribution d;
  d.kind = Kind::lorentzian;
  d.width = delta;
  if (delta < 0) throw std::invalid_argument("lorentzian width must be >= 0");
  return d;
}

DetuningDistribution DetuningDistribution::uniform(double half_width) {
  DetuningDistribution d;
  d.kind = Kind::uniform;
  d.width = half_width;
  if (half_width < 0) throw std::invalid_argument("uniform half-width must be >= 0");
  return d;
}

DetuningDistribution DetuningDistribution::list(std::vector<double> v) {
  DetuningDistribution d;
  d.kind = Kind::list;
  d.values = std::move(v);
  if (d.values.empty()) throw std::invalid_argument("empty detuning list");
  return d;
}

DetuningDistribution DetuningDistribution::from_file(const std::filesystem::path& p) {
  std::istringstream is(read_file(p));
  std::vector<double> v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    v.push_back(std::stod(line));
  }
  return list(std::move(v));
}

void mf_derivatives(const BlochState& state, const CouplingMatrices& couplings, double repump,
                    const DipoleArray& array, BlochState& out) {
  const int n = state.size();
  const double gam = array.gamma;
  const double W = repump;
  out.sx.resize(n);
  out.sy.resize(n);
  out.sz.resize(n);

  // m_a = sum_{b != a} (f_ab + i g_ab) c_b with c = Sx + i Sy = <sigma^->
  // dSz_a = -gamma(1/2+Sz) + W(1/2-Sz) - Re(conj(c_a) mf_a) + Im(conj(c_a) mg_a)
  // dc_a  = (-i delta_a - (gamma+W)/2) c_a + Sz_a * m_a
  for (int a = 0; a < n; ++a) {
    double mfr = 0, mfi = 0, mgr = 0, mgi = 0;
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      const double fr = couplings.f(a, b), gr = couplings.g(a, b);
      mfr += fr * state.sx[b];
      mfi += fr * state.sy[b];
      mgr += gr * state.sx[b];
      mgi += gr * state.sy[b];
    }
    const double cx = state.sx[a], cy = state.sy[a], z = state.sz[a];
    // conj(c_a) * m: real = cx*mr + cy*mi, imag = cx*mi - cy*mr
    out.sz[a] = -gam * (0.5 + z) + W * (0.5 - z) - (cx * mfr + cy * mfi) +
                (cx * mgi - cy * mgr);
    // dc = (-i delta - (gam+W)/2) c + z*(mf + i mg)
    const double damp = 0.5 * (gam + W);
    const double delta = array.detunings[a];
    out.sx[a] = delta * cy - damp * cx + z * (mfr - mgi);
    out.sy[a] = -delta * cx - damp * cy + z * (mfi + mgr);
  }
}

namespace {

void pack(const BlochState& s, Eigen::VectorXd& y) {
  const int n = s.size();
  y.resize(3 * n);
  y.segment(0, n) = s.sx.matrix();
  y.segment(n, n) = s.sy.matrix();
  y.segment(2 * n, n) = s.sz.matrix();
}

void unpack(const Eigen::VectorXd& y, BlochState& s) {
  const int n = static_cast<int>(y.size() / 3);
  s.sx = y.segment(0, n).array();
  s.sy = y.segment(n, n).array();
  s.sz = y.segment(2 * n, n).array();
}

}  // namespace

MfSeries integrate_mf(const BlochState& initial, const CouplingMatrices& couplings,
                      double repump, const DipoleArray& array, const MfOptions& opt) {
  if (opt.rtol <= 0) throw std::invalid_argument("integrate_mf: rtol must be > 0");
  const int n = initial.size();
  if (couplings.size() != n || array.size() != n)
    throw std::invalid_argument("integrate_mf: size mismatch");

  double t_final = opt.t_final;
  if (t_final <= 0)
    t_final = 50.0 * std::max(1.0 / array.gamma, repump > 0 ? 1.0 / repump : 0.0);

  BlochState ds = BlochState::zero(n);
  Eigen::VectorXd y;
  pack(initial, y);
  BlochState scratch = initial;

  auto rhs = [&](double, const Eigen::VectorXd& yy, Eigen::VectorXd& dydt) {
    unpack(yy, scratch);
    mf_derivatives(scratch, couplings, repump, array, ds);
    pack(ds, dydt);
  };

  MfSeries series;
  auto observer = [&](double t, const Eigen::VectorXd& yy) {
    BlochState s = BlochState::zero(n);
    unpack(yy, s);
    series.t.push_back(t);
    series.states.push_back(std::move(s));
  };

  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  oo.steady_tol = opt.steady_tol > 0 ? opt.steady_tol * array.gamma : 0.0;
  OdeStatus st = integrate_dopri5(rhs, y, 0.0, t_final, oo, opt.sample_times, observer);

  // final state always recorded
  BlochState sf = BlochState::zero(n);
  unpack(y, sf);
  if (series.t.empty() || series.t.back() < st.t_end) {
    series.t.push_back(st.t_end);
    series.states.push_back(sf);
  }
  series.steady = st.steady;
  series.stop = st.stop;
  return series;
}

OrderParameter order_parameter(const BlochState& state) {
  const int n = state.size();
  std::complex<double> z(0, 0);
  for (int a = 0; a < n; ++a) z += std::complex<double>(state.sx[a], state.sy[a]);
  z /= static_cast<double>(n);
  OrderParameter op;
  op.Z = std::abs(z);
  op.Phi = std::arg(z);
  return op;
}

OrderParameter order_parameter_series(const MfSeries& series) {
  if (series.states.empty()) throw std::invalid_argument("empty series");
  OrderParameter op = order_parameter(series.states.back());
  const std::size_t m = series.states.size();
  std::size_t i0 = m - std::max<std::size_t>(2, m / 5);
  if (m < 3) {
    op.omega_bar = 0;
    return op;
  }
  // unwrap Phi(t) over the fit window, then least-squares slope
  std::vector<double> ts, phis;
  double prev = 0, offset = 0;
  for (std::size_t i = i0; i < m; ++i) {
    double phi = order_parameter(series.states[i]).Phi;
    if (!ts.empty()) {
      double d = phi - prev;
      while (d > M_PI) { d -= 2 * M_PI; offset -= 2 * M_PI; }
      while (d < -M_PI) { d += 2 * M_PI; offset += 2 * M_PI; }
    }
    prev = phi;
    ts.push_back(series.t[i]);
    phis.push_back(phi + offset);
  }
  double tm = 0, pm = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) { tm += ts[i]; pm += phis[i]; }
  tm /= ts.size();
  pm /= ts.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    num += (ts[i] - tm) * (phis[i] - pm);
    den += (ts[i] - tm) * (ts[i] - tm);
  }
  op.omega_bar = den > 0 ? num / den : 0.0;
  return op;
}

CouplingMatrices mean_field_all_to_all(int n, double f_eff, double gamma) {
  if (n < 2) throw std::invalid_argument("mean_field_all_to_all: n < 2");
  CouplingMatrices cm;
  cm.f = Eigen::MatrixXd::Constant(n, n, f_eff / (n - 1));
  cm.f.diagonal().setConstant(gamma);
  cm.g = Eigen::MatrixXd::Zero(n, n);
  cm.f_eff = n * f_eff / (n - 1);
  cm.g_eff = 0;
  return cm;
}

double z_closed_form(double f_eff, double repump, double gamma) {
  if (!(f_eff > 0)) throw std::invalid_argument("z_closed_form: f_eff must be > 0");
  if (repump < 0) throw std::invalid_argument("z_closed_form: repump must be >= 0");
  const double P = repump - gamma, Q = repump + gamma;
  const double radicand = f_eff * P - Q * Q;
  if (radicand <= 0) return 0.0;
  return std::sqrt(radicand) / (std::sqrt(2.0) * f_eff);
}

double z_lorentzian(double f_eff, double repump, double gamma, double delta) {
  if (delta < 0) throw std::invalid_argument("z_lorentzian: delta must be >= 0");
  const double P = repump - gamma, Q = repump + gamma;
  const double inner = delta * delta + f_eff * P;
  if (inner <= 0) return 0.0;
  const double radicand = f_eff * P - Q * Q + 2 * delta * delta - 2 * delta * std::sqrt(inner);
  if (radicand <= 0) return 0.0;
  return std::sqrt(radicand) / (std::sqrt(2.0) * f_eff);
}

double delta_critical(double f_eff, double repump, double gamma) {
  const double P = repump - gamma, Q = repump + gamma;
  return (f_eff * P - Q * Q) / (2.0 * Q);
}

double w_optimal(double f_eff, double gamma) { return 0.5 * f_eff - gamma; }

namespace {

// 64-point Gauss-Legendre nodes/weights on [-1,1], generated by Newton
// iteration on the Legendre recurrence at first use.
struct GaussLegendre {
  std::vector<double> x, w;
  explicit GaussLegendre(int n) : x(n), w(n) {
    for (int i = 0; i < n; ++i) {
      double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = xi;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        double dp = n * (xi * p1 - p0) / (xi * xi - 1);
        double dx = p1 / dp;
        xi -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      double p0 = 1, p1 = xi;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (xi * p1 - p0) / (xi * xi - 1);
      x[i] = xi;
      w[i] = 2.0 / ((1 - xi * xi) * dp * dp);
    }
  }
};

const GaussLegendre& gl_rule() {
  static GaussLegendre rule(200);
  return rule;
}

// Average of fn(delta) over the detuning distribution.
double dist_average(const DetuningDistribution& dist, const std::function<double(double)>& fn) {
  switch (dist.kind) {
    case DetuningDistribution::Kind::delta:
      return fn(0.0);
    case DetuningDistribution::Kind::list: {
      double s = 0;
      for (double d : dist.values) s += fn(d);
      return s / static_cast<double>(dist.values.size());
    }
    case DetuningDistribution::Kind::uniform: {
      if (dist.width == 0) return fn(0.0);
      const auto& r = gl_rule();
      double s = 0;
      for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * fn(dist.width * r.x[i]);
      return 0.5 * s;  // weight 1/(2h) * h dx
    }
    case DetuningDistribution::Kind::lorentzian: {
      if (dist.width == 0) return fn(0.0);
      // delta = Delta tan(u), p(delta) d delta = du/pi, u in (-pi/2, pi/2)
      const auto& r = gl_rule();
      double s = 0;
      for (std::size_t i = 0; i < r.x.size(); ++i) {
        double u = 0.5 * M_PI * r.x[i];
        s += 0.5 * M_PI * r.w[i] * fn(dist.width * std::tan(u)) / M_PI;
      }
      return s;
    }
  }
  return 0.0;
}

}  // namespace

SelfConsistentResult self_consistent_solve(double f_eff, double g_eff, double repump,
                                           double gamma, const DetuningDistribution& dist) {
  const double P = repump - gamma, Q = repump + gamma;
  SelfConsistentResult res;
  if (Q <= 0) throw std::invalid_argument("self_consistent_solve: W + gamma must be > 0");

  // Amplitude condition at fixed omega_bar: h(Z) = avg_d[ P (f Q + 2 g (d+w)) /
  // (Q (4(d+w)^2 + 2(f^2+g^2) Z^2 + Q^2)) ] - 1, strictly decreasing in Z.
  auto amp_residual = [&](double Z, double w) {
    const double zz = 2.0 * (f_eff * f_eff + g_eff * g_eff) * Z * Z;
    return dist_average(dist, [&](double d) {
             double dw = d + w;
             return P * (f_eff * Q + 2.0 * g_eff * dw) / (Q * (4.0 * dw * dw + zz + Q * Q));
           }) - 1.0;
  };
  auto solve_z = [&](double w) -> double {
    if (amp_residual(0.0, w) <= 0) return 0.0;
    double lo = 0.0, hi = 0.5;
    if (amp_residual(hi, w) > 0) return hi;  // clamped at the physical bound
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (amp_residual(mid, w) > 0 ? lo : hi) = mid;
      if (hi - lo < 1e-15) break;
    }
    return 0.5 * (lo + hi);
  };
  // Frequency condition residual at the solved Z(w).
  auto freq_residual = [&](double w) {
    double Z = solve_z(w);
    const double zz = 2.0 * (f_eff * f_eff + g_eff * g_eff) * Z * Z;
    return dist_average(dist, [&](double d) {
      double dw = d + w;
      return P * (g_eff * Q - 2.0 * f_eff * dw) / (Q * (4.0 * dw * dw + zz + Q * Q));
    });
  };

  double dspread = 0.0;
  if (dist.kind == DetuningDistribution::Kind::lorentzian ||
      dist.kind == DetuningDistribution::Kind::uniform)
    dspread = dist.width;
  if (dist.kind == DetuningDistribution::Kind::list)
    for (double d : dist.values) dspread = std::max(dspread, std::abs(d));

  const double w0 = g_eff * Q / (2.0 * f_eff);
  const double half = std::abs(w0) + 4.0 * dspread + Q + 1.0;
  const int ngrid = 257;

  std::vector<std::pair<double, double>> brackets;
  double prev_w = w0 - half, prev_r = freq_residual(prev_w);
  for (int i = 1; i < ngrid; ++i) {
    double w = w0 - half + 2.0 * half * i / (ngrid - 1);
    double r = freq_residual(w);
    if ((prev_r <= 0 && r > 0) || (prev_r >= 0 && r < 0) || r == 0)
      brackets.emplace_back(prev_w, w);
    prev_w = w;
    prev_r = r;
  }
  if (brackets.empty())
    throw std::runtime_error("self_consistent_solve: no omega_bar bracket; residual at guess " +
                             std::to_string(freq_residual(w0)));

  for (auto [lo, hi] : brackets) {
    double rl = freq_residual(lo);
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      double rm = freq_residual(mid);
      if ((rl <= 0) == (rm <= 0)) {
        lo = mid;
        rl = rm;
      } else {
        hi = mid;
      }
      if (hi - lo < 1e-13 * (1.0 + std::abs(mid))) break;
    }
    double w = 0.5 * (lo + hi);
    res.roots.emplace_back(w, solve_z(w));
  }
  res.multiple_roots = res.roots.size() > 1;
  auto best = std::max_element(res.roots.begin(), res.roots.end(),
                               [](auto& a, auto& b) { return a.second < b.second; });
  res.omega_bar = best->first;
  res.Z = best->second;
  res.nontrivial = res.Z > 0;
  return res;
}

void write_mf_series_csv(const MfSeries& series, const std::filesystem::path& path) {
  std::string out = "t,Z,Phi,mean_Sz\n";
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    OrderParameter op = order_parameter(series.states[i]);
    double msz = series.states[i].sz.mean();
    out += format_g17(series.t[i]) + "," + format_g17(op.Z) + "," + format_g17(op.Phi) + "," +
           format_g17(msz) + "\n";
  }
  atomic_write_file(path, out);
}

}  // namespace radsync
