#include "radsync/collective.hpp"

#include <cmath>
#include <stdexcept>

#include "radsync/ode.hpp"

namespace radsync {

SymmetricSpace::SymmetricSpace(int n) : n_(n) {
  if (n < 0) throw std::invalid_argument("SymmetricSpace: n < 0");
  const int stride = n + 1;
  lookup_.assign(stride * stride * stride, -1);
  for (int n0 = 0; n0 <= n; ++n0)
    for (int n1 = 0; n1 + n0 <= n; ++n1)
      for (int n2 = 0; n2 + n1 + n0 <= n; ++n2) {
        lookup_[(n0 * stride + n1) * stride + n2] = static_cast<int>(states_.size());
        states_.push_back({n0, n1, n2, n - n0 - n1 - n2});
      }
}

int SymmetricSpace::index(int n_uu, int n_ud, int n_du) const {
  const int stride = n_ + 1;
  if (n_uu < 0 || n_ud < 0 || n_du < 0 || n_uu + n_ud + n_du > n_) return -1;
  return lookup_[(n_uu * stride + n_ud) * stride + n_du];
}

namespace {

// Transition table entries: class moves applied to the source configuration
// with the rate = coeff * (product of source-class counts).
struct Move {
  int from1, to1;
  int from2 = -1, to2 = -1;  // second leg for two-site terms
};

}  // namespace

SymmetricGenerator::SymmetricGenerator(int n, double f_eff, double repump, double gamma)
    : space_(n), f_eff_(f_eff), repump_(repump), gamma_(gamma) {
  if (n < 1) throw std::invalid_argument("SymmetricGenerator: N >= 1 required");
  if (repump < 0 || gamma <= 0) throw std::invalid_argument("SymmetricGenerator: bad rates");
  const double fc = f_eff / n;
  const double W = repump;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(space_.size()) * 14);
  auto emit = [&](int src, int n0, int n1, int n2, double coeff) {
    if (coeff == 0.0) return;
    int idx = space_.index(n0, n1, n2);
    if (idx < 0) throw std::logic_error("SymmetricGenerator: move out of range");
    trip.emplace_back(idx, src, coeff);
  };

  for (int src = 0; src < space_.size(); ++src) {
    const auto& s = space_.state(src);
    const double n0 = s[0], n1 = s[1], n2 = s[2], n3 = s[3];
    const int i0 = s[0], i1 = s[1], i2 = s[2];

    // single-site decay (rate gamma): class uu -> dd
    emit(src, i0 - 1, i1, i2, gamma * n0);
    // single-site repump: dd -> uu
    emit(src, i0 + 1, i1, i2, W * n3);
    // diagonal single-site parts
    emit(src, i0, i1, i2,
         -gamma * n0 - W * n3 - 0.5 * (gamma + W) * (n1 + n2));

    // collective cross terms, rate fc per ordered pair
    // (A) + fc * [right-mult sp] x [left-mult sm]
    emit(src, i0 - 2, i1 + 1, i2 + 1, fc * n0 * (n0 - 1));  // (uu->ud, uu->du)
    emit(src, i0 - 1, i1, i2, fc * n0 * n1);                // (uu->ud, ud->dd)
    emit(src, i0 - 1, i1, i2, fc * n2 * n0);                // (du->dd, uu->du)
    emit(src, i0, i1 - 1, i2 - 1, fc * n2 * n1);            // (du->dd, ud->dd)
    // (B) -(fc/2) [left-mult sp] x [left-mult sm]
    emit(src, i0, i1, i2, -0.5 * fc * (n2 * n0 + n3 * n1));         // diagonal legs
    emit(src, i0 + 1, i1 - 1, i2 - 1, -0.5 * fc * n2 * n1);         // (du->uu, ud->dd)
    emit(src, i0 - 1, i1 + 1, i2 + 1, -0.5 * fc * n3 * n0);         // (dd->ud, uu->du)
    // (C) -(fc/2) [right-mult sp] x [right-mult sm]
    emit(src, i0, i1, i2, -0.5 * fc * (n0 * n1 + n2 * n3));         // diagonal legs
    emit(src, i0 - 1, i1 + 1, i2 + 1, -0.5 * fc * n0 * n3);         // (uu->ud, dd->du)
    emit(src, i0 + 1, i1 - 1, i2 - 1, -0.5 * fc * n2 * n1);         // (du->dd, ud->uu)
  }
  op_.resize(space_.size(), space_.size());
  op_.setFromTriplets(trip.begin(), trip.end());
  op_.makeCompressed();
}

void SymmetricGenerator::apply(const Eigen::VectorXd& d, Eigen::VectorXd& out) const {
  out.noalias() = op_ * d;
}

Eigen::VectorXd SymmetricGenerator::apply(const Eigen::VectorXd& d) const {
  return op_ * d;
}

Eigen::VectorXd SymmetricGenerator::all_down() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(space_.size());
  d[space_.index(0, 0, 0)] = 1.0;
  return d;
}

double SymmetricGenerator::trace_of(const Eigen::VectorXd& d) const {
  double tr = 0;
  for (int n0 = 0; n0 <= sites(); ++n0) tr += d[space_.index(n0, 0, 0)];
  return tr;
}

double SymmetricGenerator::trace_conservation_residual() const {
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(space_.size());
  for (int n0 = 0; n0 <= sites(); ++n0) tau[space_.index(n0, 0, 0)] = 1.0;
  Eigen::VectorXd r = op_.transpose() * tau;
  return r.cwiseAbs().maxCoeff();
}

double SymmetricGenerator::excited_population(const Eigen::VectorXd& d) const {
  const int n = sites();
  double s = 0;
  for (int n0 = 0; n0 <= n; ++n0) s += d[space_.index(n0, 0, 0)] * n0;
  return s / n;
}

double SymmetricGenerator::expect_sz(const Eigen::VectorXd& d) const {
  const int n = sites();
  double s = 0;
  for (int n0 = 0; n0 <= n; ++n0) s += d[space_.index(n0, 0, 0)] * (2.0 * n0 - n);
  return s / n;
}

double SymmetricGenerator::pair_pm(const Eigen::VectorXd& d) const {
  const int n = sites();
  if (n < 2) throw std::invalid_argument("pair_pm: needs N >= 2");
  double s = 0;
  for (int n0 = 0; n0 + 2 <= n; ++n0) {
    int idx = space_.index(n0, 1, 1);
    if (idx >= 0) s += d[idx];
  }
  return s / (static_cast<double>(n) * (n - 1));
}

double SymmetricGenerator::zq(const Eigen::VectorXd& d) const {
  double v = pair_pm(d);
  return v > 0 ? std::sqrt(v) : 0.0;
}

namespace {

// dual class under the trace pairing tr(e_i e_j): uu<->uu, dd<->dd, ud<->du
inline int dual_class(int c) { return c == 1 ? 2 : (c == 2 ? 1 : c); }
// operator class of |v><u| with bits u,v (0 = up): uu=0, ud=1, du=2, dd=3
inline int op_class(int v, int u) { return 2 * v + u; }

}  // namespace

Eigen::Matrix2cd SymmetricGenerator::reduced_single_state(const Eigen::VectorXd& d) const {
  const int n = sites();
  Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
  for (int u = 0; u < 2; ++u)
    for (int v = 0; v < 2; ++v) {
      const int od = dual_class(op_class(v, u));
      double val = 0;
      for (int n0 = 0; n0 + 1 <= n; ++n0) {
        std::array<int, 4> cnt{n0, 0, 0, n - 1 - n0};
        cnt[od] += 1;
        int idx = space_.index(cnt[0], cnt[1], cnt[2]);
        if (idx < 0) continue;
        // weight = (count of class od in cnt) / N
        val += d[idx] * static_cast<double>(cnt[od]) / n;
      }
      out(u, v) = val;
    }
  return out;
}

Eigen::Matrix4cd SymmetricGenerator::reduced_pair_state(const Eigen::VectorXd& d) const {
  const int n = sites();
  if (n < 2) throw std::invalid_argument("reduced_pair_state: needs N >= 2");
  Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
  for (int ua = 0; ua < 2; ++ua)
    for (int ub = 0; ub < 2; ++ub)
      for (int va = 0; va < 2; ++va)
        for (int vb = 0; vb < 2; ++vb) {
          const int oa = dual_class(op_class(va, ua));
          const int ob = dual_class(op_class(vb, ub));
          double val = 0;
          for (int n0 = 0; n0 + 2 <= n; ++n0) {
            std::array<int, 4> cnt{n0, 0, 0, n - 2 - n0};
            cnt[oa] += 1;
            cnt[ob] += 1;
            int idx = space_.index(cnt[0], cnt[1], cnt[2]);
            if (idx < 0) continue;
            // ordered pairs of distinct sites carrying classes (oa, ob)
            double pairs = (oa == ob) ? cnt[oa] * (cnt[oa] - 1.0)
                                      : static_cast<double>(cnt[oa]) * cnt[ob];
            val += d[idx] * pairs / (static_cast<double>(n) * (n - 1));
          }
          out(2 * ua + ub, 2 * va + vb) = val;
        }
  return out;
}

DensityMatrix SymmetricGenerator::full_density_matrix(const Eigen::VectorXd& d,
                                                      int max_sites) const {
  const int n = sites();
  if (n > max_sites)
    throw std::invalid_argument("full_density_matrix: N exceeds the expansion guard");
  const int dim = 1 << n;
  // multinomial weights per configuration
  std::vector<double> logfact(n + 1, 0.0);
  for (int k = 2; k <= n; ++k) logfact[k] = logfact[k - 1] + std::log(static_cast<double>(k));
  DensityMatrix rho(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) {
      std::array<int, 4> cnt{0, 0, 0, 0};
      for (int a = 0; a < n; ++a) {
        int rb = (r >> (n - 1 - a)) & 1, cb = (c >> (n - 1 - a)) & 1;
        // class of |r><c| at site a: |r_a><c_a| = op_class(v=r_a, u=c_a)
        ++cnt[op_class(rb, cb)];
      }
      int idx = space_.index(cnt[0], cnt[1], cnt[2]);
      double logm = logfact[n] - logfact[cnt[0]] - logfact[cnt[1]] - logfact[cnt[2]] -
                    logfact[cnt[3]];
      rho(r, c) = d[idx] * std::exp(-logm);
    }
  return rho;
}

namespace {

template <class Gen>
SymmetricSeries evolve_generic(const Gen& gen, const Eigen::VectorXd& d0,
                               std::span<const double> t_grid, const EvolveOptions& opt) {
  Eigen::VectorXd y = d0;
  auto rhs = [&](double, const Eigen::VectorXd& yy, Eigen::VectorXd& dydt) {
    gen.apply(yy, dydt);
  };
  SymmetricSeries series;
  auto observer = [&](double t, const Eigen::VectorXd& yy) {
    series.t.push_back(t);
    series.states.push_back(yy);
  };
  if (t_grid.empty()) throw std::invalid_argument("evolve_symmetric: empty grid");
  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  oo.steady_tol = opt.steady_tol;
  OdeStatus st = integrate_dopri5(rhs, y, 0.0, t_grid.back(), oo, t_grid, observer);
  series.steady = st.steady;
  if (series.t.empty() || series.t.back() < st.t_end) {
    series.t.push_back(st.t_end);
    series.states.push_back(y);
  }
  return series;
}

}  // namespace

SymmetricSeries evolve_symmetric(const SymmetricGenerator& gen, const Eigen::VectorXd& d0,
                                 std::span<const double> t_grid, const EvolveOptions& opt) {
  return evolve_generic(gen, d0, t_grid, opt);
}

SymmetricSteadyResult steady_symmetric(const SymmetricGenerator& gen,
                                       const SteadyStateOptions& opt) {
  Eigen::VectorXd y = gen.all_down();
  auto rhs = [&](double, const Eigen::VectorXd& yy, Eigen::VectorXd& dydt) {
    gen.apply(yy, dydt);
  };
  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  // drift measured on the observables, not the raw coefficients: the
  // multinomial rescaling makes the coefficient norm a poor proxy
  auto observable_drift = [&](const Eigen::VectorXd& yy) {
    Eigen::VectorXd dd = gen.apply(yy);
    double drift = std::abs(gen.trace_of(dd));
    drift = std::max(drift, std::abs(gen.expect_sz(dd)));
    if (gen.sites() >= 2) drift = std::max(drift, std::abs(gen.pair_pm(dd)));
    return drift;
  };
  SymmetricSteadyResult res;
  const double chunk = 10.0;
  double t = 0.0;
  while (t < opt.t_max) {
    double t1 = std::min(t + chunk, opt.t_max);
    integrate_dopri5(rhs, y, t, t1, oo);
    t = t1;
    res.drift = observable_drift(y);
    if (res.drift < opt.drift_tol) {
      res.converged = true;
      break;
    }
  }
  res.d = y;
  res.t_end = t;
  if (!res.converged)
    throw std::runtime_error("steady_symmetric: observable drift " + std::to_string(res.drift) +
                             " above tolerance after t = " + std::to_string(t));
  return res;
}

MarkedSymmetricGenerator::MarkedSymmetricGenerator(const SymmetricGenerator& base)
    : base_(base), rest_(base.sites() - 1) {
  const int n = base.sites();
  if (n < 2) throw std::invalid_argument("MarkedSymmetricGenerator: N >= 2 required");
  const double fc = base.f_eff() / n;
  const double W = base.repump();
  const double gamma = base.gamma();
  const int rdim = rest_.size();

  // two-site legs of the collective dissipator: sign, P-transitions (right-mult
  // by sp / left by sp), Q-transitions (left-mult by sm / right by sm)
  struct Leg { int from, to; };
  struct Part { double coeff; std::array<Leg, 2> p, q; };
  const std::array<Part, 3> parts{{
      {fc, {{{0, 1}, {2, 3}}}, {{{0, 2}, {1, 3}}}},        // 2 RM+ x LM-
      {-0.5 * fc, {{{2, 0}, {3, 1}}}, {{{0, 2}, {1, 3}}}},  // LM+ x LM-
      {-0.5 * fc, {{{0, 1}, {2, 3}}}, {{{1, 0}, {3, 2}}}},  // RM+ x RM-
  }};
  const std::array<double, 4> dec_diag{-gamma, -0.5 * gamma, -0.5 * gamma, 0.0};
  const std::array<double, 4> rep_diag{0.0, -0.5 * W, -0.5 * W, -W};

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(dim()) * 20);
  auto emit = [&](int m_src, int src, int m_tgt, int n0, int n1, int n2, double coeff) {
    if (coeff == 0.0) return;
    int idx = rest_.index(n0, n1, n2);
    if (idx < 0) throw std::logic_error("MarkedSymmetricGenerator: move out of range");
    trip.emplace_back(m_tgt * rdim + idx, m_src * rdim + src, coeff);
  };

  for (int m = 0; m < 4; ++m) {
    for (int src = 0; src < rdim; ++src) {
      const auto& s = rest_.state(src);
      const double n0 = s[0], n1 = s[1], n2 = s[2], n3 = s[3];
      const int i0 = s[0], i1 = s[1], i2 = s[2];
      // unmarked single-site
      emit(m, src, m, i0 - 1, i1, i2, gamma * n0);
      emit(m, src, m, i0 + 1, i1, i2, W * n3);
      emit(m, src, m, i0, i1, i2,
           -gamma * n0 - W * n3 - 0.5 * (gamma + W) * (n1 + n2));
      // marked single-site
      if (m == 0) emit(m, src, 3, i0, i1, i2, gamma);
      if (m == 3) emit(m, src, 0, i0, i1, i2, W);
      emit(m, src, m, i0, i1, i2, dec_diag[m] + rep_diag[m]);
      // collective pairs
      const std::array<double, 4> cnt{n0, n1, n2, n3};
      for (const auto& part : parts) {
        for (const auto& pl : part.p) {
          for (const auto& ql : part.q) {
            // both legs on unmarked sites
            double c = cnt[pl.from] * (cnt[ql.from] - (pl.from == ql.from ? 1.0 : 0.0));
            if (c != 0.0) {
              std::array<int, 3> t{i0, i1, i2};
              auto add = [&](int cls, int dv) { if (cls < 3) t[cls] += dv; };
              add(pl.from, -1);
              add(pl.to, +1);
              add(ql.from, -1);
              add(ql.to, +1);
              emit(m, src, m, t[0], t[1], t[2], part.coeff * c);
            }
            // marked site takes the P leg
            if (m == pl.from && cnt[ql.from] > 0) {
              std::array<int, 3> t{i0, i1, i2};
              auto add = [&](int cls, int dv) { if (cls < 3) t[cls] += dv; };
              add(ql.from, -1);
              add(ql.to, +1);
              emit(m, src, pl.to, t[0], t[1], t[2], part.coeff * cnt[ql.from]);
            }
            // marked site takes the Q leg
            if (m == ql.from && cnt[pl.from] > 0) {
              std::array<int, 3> t{i0, i1, i2};
              auto add = [&](int cls, int dv) { if (cls < 3) t[cls] += dv; };
              add(pl.from, -1);
              add(pl.to, +1);
              emit(m, src, ql.to, t[0], t[1], t[2], part.coeff * cnt[pl.from]);
            }
          }
        }
      }
    }
  }
  op_.resize(dim(), dim());
  op_.setFromTriplets(trip.begin(), trip.end());
  op_.makeCompressed();
}

void MarkedSymmetricGenerator::apply(const Eigen::VectorXd& d, Eigen::VectorXd& out) const {
  out.noalias() = op_ * d;
}

Eigen::VectorXd MarkedSymmetricGenerator::lower_marked(const Eigen::VectorXd& d_sym) const {
  const int n = base_.sites();
  const int rdim = rest_.size();
  Eigen::VectorXd dm = Eigen::VectorXd::Zero(dim());
  // sm on the left maps classes uu->du and ud->dd at the marked site
  for (int idx = 0; idx < rdim; ++idx) {
    const auto& s = rest_.state(idx);
    int src;
    src = base_.space().index(s[0] + 1, s[1], s[2]);
    if (src >= 0) dm[2 * rdim + idx] = d_sym[src] * (s[0] + 1.0) / n;
    src = base_.space().index(s[0], s[1] + 1, s[2]);
    if (src >= 0) dm[3 * rdim + idx] = d_sym[src] * (s[1] + 1.0) / n;
  }
  return dm;
}

double MarkedSymmetricGenerator::trace_sp_marked(const Eigen::VectorXd& dm) const {
  const int rdim = rest_.size();
  double s = 0;
  for (int n0 = 0; n0 <= rest_.sites(); ++n0) {
    int idx = rest_.index(n0, 0, 0);
    if (idx >= 0) s += dm[2 * rdim + idx];  // marked class du
  }
  return s;
}

double MarkedSymmetricGenerator::trace_sp_rest(const Eigen::VectorXd& dm) const {
  const int rdim = rest_.size();
  double s = 0;
  for (int m : {0, 3}) {
    for (int n0 = 0; n0 + 1 <= rest_.sites(); ++n0) {
      int idx = rest_.index(n0, 0, 1);  // one du among the unmarked sites
      if (idx >= 0) s += dm[m * rdim + idx];
    }
  }
  return s / (base_.sites() - 1.0);
}

std::vector<std::complex<double>> two_time_symmetric(const SymmetricGenerator& gen,
                                                     const Eigen::VectorXd& d_steady,
                                                     std::span<const double> tau_grid,
                                                     const EvolveOptions& opt) {
  MarkedSymmetricGenerator marked(gen);
  Eigen::VectorXd y = marked.lower_marked(d_steady);
  std::vector<std::complex<double>> out;
  out.reserve(tau_grid.size());
  auto record = [&](const Eigen::VectorXd& yy) {
    out.emplace_back(2.0 * (marked.trace_sp_marked(yy) + marked.trace_sp_rest(yy)), 0.0);
  };
  if (!tau_grid.empty() && tau_grid.front() == 0.0) {
    record(y);
    tau_grid = tau_grid.subspan(1);
  }
  if (tau_grid.empty()) return out;
  auto rhs = [&](double, const Eigen::VectorXd& yy, Eigen::VectorXd& dydt) {
    marked.apply(yy, dydt);
  };
  auto observer = [&](double t, const Eigen::VectorXd& yy) {
    if (t == 0.0) return;
    record(yy);
  };
  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  integrate_dopri5(rhs, y, 0.0, tau_grid.back(), oo, tau_grid, observer);
  return out;
}

}  // namespace radsync
