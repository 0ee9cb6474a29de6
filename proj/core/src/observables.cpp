#include "radsync/observables.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "radsync/util.hpp"

namespace radsync {

using cd = std::complex<double>;

ZqFromState zq_of_density(const DensityMatrix& rho) {
  const int dim = static_cast<int>(rho.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  if (n < 2) throw std::invalid_argument("zq_of_density: needs >= 2 sites");
  cd total = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) total += pair_correlator_pm(rho, a, b);
  cd avg = total / (static_cast<double>(n) * (n - 1));
  ZqFromState z;
  z.raw_re = avg.real();
  z.imag_residual = std::abs(avg.imag());
  z.zq = avg.real() > 0 ? std::sqrt(avg.real()) : 0.0;
  return z;
}

double vn_entropy_bits(const Eigen::MatrixXcd& rho, double clip) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (rho + rho.adjoint().eval()),
                                                     Eigen::EigenvaluesOnly);
  double s = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double l = es.eigenvalues()[i];
    if (l > clip) s -= l * std::log2(l);
  }
  return s;
}

namespace {

Eigen::Matrix2cd trace_out_a(const PairState& rho) {
  Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int b2 = 0; b2 < 2; ++b2) out(b, b2) += rho(2 * a + b, 2 * a + b2);
  return out;
}

Eigen::Matrix2cd trace_out_b(const PairState& rho) {
  Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
  for (int a = 0; a < 2; ++a)
    for (int a2 = 0; a2 < 2; ++a2)
      for (int b = 0; b < 2; ++b) out(a, a2) += rho(2 * a + b, 2 * a2 + b);
  return out;
}

// conditional entropy of B after measuring A along the unit vector n
double conditional_entropy(const PairState& rho, const Eigen::Vector3d& nvec) {
  Eigen::Matrix2cd sigma_n;
  sigma_n << cd(nvec[2], 0), cd(nvec[0], -nvec[1]), cd(nvec[0], nvec[1]), cd(-nvec[2], 0);
  double total = 0;
  for (int sign : {+1, -1}) {
    Eigen::Matrix2cd proj = 0.5 * (Eigen::Matrix2cd::Identity() + double(sign) * sigma_n);
    // M = proj (x) I acting on A
    PairState m = PairState::Zero();
    for (int a = 0; a < 2; ++a)
      for (int a2 = 0; a2 < 2; ++a2)
        for (int b = 0; b < 2; ++b) m(2 * a + b, 2 * a2 + b) = proj(a, a2);
    PairState post = m * rho * m;
    double p = post.trace().real();
    if (p < 1e-14) continue;
    Eigen::Matrix2cd rb = trace_out_a(post) / p;
    total += p * vn_entropy_bits(rb);
  }
  return total;
}

Eigen::Vector3d angles_to_axis(double th, double ph) {
  return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

}  // namespace

double mutual_information(const PairState& rho) {
  return vn_entropy_bits(trace_out_b(rho)) + vn_entropy_bits(trace_out_a(rho)) -
         vn_entropy_bits(rho);
}

DiscordResult quantum_discord(const PairState& rho, const DiscordOptions& opt) {
  DiscordResult res;
  res.mutual_information = mutual_information(rho);
  const double sb = vn_entropy_bits(trace_out_a(rho));

  auto objective = [&](double th, double ph) {  // classical correlation J(n)
    return sb - conditional_entropy(rho, angles_to_axis(th, ph));
  };

  double best = -1e300, best_th = 0, best_ph = 0;
  for (int i = 0; i < opt.grid_theta; ++i) {
    double th = M_PI * (i + 0.5) / opt.grid_theta;
    for (int j = 0; j < opt.grid_phi; ++j) {
      double ph = 2 * M_PI * j / opt.grid_phi;
      double v = objective(th, ph);
      if (v > best) {
        best = v;
        best_th = th;
        best_ph = ph;
      }
    }
  }

  // Nelder-Mead refinement in (theta, phi) from the grid seed and restarts
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uth(0.0, M_PI), uph(0.0, 2 * M_PI);
  auto refine = [&](double th0, double ph0) {
    struct Vertex {
      double th, ph, val;
    };
    auto mk = [&](double t, double p) { return Vertex{t, p, objective(t, p)}; };
    std::array<Vertex, 3> splx{mk(th0, ph0), mk(th0 + 0.12, ph0 + 0.07), mk(th0 - 0.05, ph0 + 0.15)};
    for (int it = 0; it < 200; ++it) {
      std::sort(splx.begin(), splx.end(), [](auto& a, auto& b) { return a.val > b.val; });
      if (std::abs(splx[0].val - splx[2].val) < opt.tol * 0.01) break;
      double cth = 0.5 * (splx[0].th + splx[1].th), cph = 0.5 * (splx[0].ph + splx[1].ph);
      Vertex refl = mk(cth + (cth - splx[2].th), cph + (cph - splx[2].ph));
      if (refl.val > splx[0].val) {
        Vertex exp2 = mk(cth + 2 * (cth - splx[2].th), cph + 2 * (cph - splx[2].ph));
        splx[2] = exp2.val > refl.val ? exp2 : refl;
      } else if (refl.val > splx[1].val) {
        splx[2] = refl;
      } else {
        Vertex contr = mk(cth + 0.5 * (splx[2].th - cth), cph + 0.5 * (splx[2].ph - cph));
        if (contr.val > splx[2].val) {
          splx[2] = contr;
        } else {
          splx[1] = mk(0.5 * (splx[0].th + splx[1].th), 0.5 * (splx[0].ph + splx[1].ph));
          splx[2] = mk(0.5 * (splx[0].th + splx[2].th), 0.5 * (splx[0].ph + splx[2].ph));
        }
      }
    }
    std::sort(splx.begin(), splx.end(), [](auto& a, auto& b) { return a.val > b.val; });
    return splx[0];
  };

  auto top = refine(best_th, best_ph);
  if (top.val > best) {
    best = top.val;
    best_th = top.th;
    best_ph = top.ph;
  }
  for (int k = 0; k < opt.restarts; ++k) {
    auto v = refine(uth(rng), uph(rng));
    if (v.val > best) {
      best = v.val;
      best_th = v.th;
      best_ph = v.ph;
    }
  }

  res.classical = best;
  res.best_axis = angles_to_axis(best_th, best_ph);
  res.discord = std::max(0.0, res.mutual_information - res.classical);
  return res;
}

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd d = a - b;
  d = 0.5 * (d + d.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

namespace {

struct Model {
  // y = A cos(nu t) exp(-g t)
  static double eval(double a, double nu, double g, double t) {
    return a * std::cos(nu * t) * std::exp(-g * t);
  }
};

// Levenberg-Marquardt on (A, nu, g); nu optionally frozen.
struct LmResult {
  double a, nu, g, rms;
  bool ok;
};

LmResult lm_fit(std::span<const double> tau, std::span<const double> y, double a0, double nu0,
                double g0, bool freeze_nu, int max_iter) {
  const int m = static_cast<int>(tau.size());
  double a = a0, nu = nu0, g = g0;
  double lambda = 1e-3;
  auto chi2 = [&](double aa, double nn, double gg) {
    double s = 0;
    for (int i = 0; i < m; ++i) {
      double r = Model::eval(aa, nn, gg, tau[i]) - y[i];
      s += r * r;
    }
    return s;
  };
  double c = chi2(a, nu, g);
  bool ok = false;
  const int np = freeze_nu ? 2 : 3;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(np, np);
    Eigen::VectorXd jtr = Eigen::VectorXd::Zero(np);
    for (int i = 0; i < m; ++i) {
      const double t = tau[i];
      const double e = std::exp(-g * t), cs = std::cos(nu * t), sn = std::sin(nu * t);
      const double r = a * cs * e - y[i];
      Eigen::VectorXd jrow(np);
      if (freeze_nu) {
        jrow << cs * e, -a * t * cs * e;
      } else {
        jrow << cs * e, -a * t * sn * e, -a * t * cs * e;
      }
      jtj += jrow * jrow.transpose();
      jtr += jrow * r;
    }
    Eigen::MatrixXd lhs = jtj + lambda * Eigen::MatrixXd(jtj.diagonal().asDiagonal());
    Eigen::VectorXd step = lhs.ldlt().solve(-jtr);
    double a2 = a + step[0];
    double nu2 = freeze_nu ? nu : nu + step[1];
    double g2 = g + step[freeze_nu ? 1 : 2];
    double c2 = chi2(a2, nu2, g2);
    if (c2 < c) {
      const double rel = (c - c2) / std::max(c, 1e-300);
      a = a2;
      nu = nu2;
      g = g2;
      c = c2;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (rel < 1e-14) {
        ok = true;
        break;
      }
    } else {
      lambda *= 3.0;
      if (lambda > 1e12) {
        ok = true;  // stalled at a minimum
        break;
      }
    }
  }
  return {a, nu, g, std::sqrt(c / m), ok};
}

}  // namespace

TwoTimeFit fit_two_time(std::span<const double> tau, std::span<const cd> z,
                        const TwoTimeFitOptions& opt) {
  const int m = static_cast<int>(tau.size());
  if (m != static_cast<int>(z.size())) throw std::invalid_argument("fit_two_time: size mismatch");
  if (m < 40) throw std::invalid_argument("fit_two_time: needs >= 40 samples");
  std::vector<double> y(m);
  for (int i = 0; i < m; ++i) y[i] = z[i].real();

  const double span = tau.back() - tau.front();
  const double resolution = opt.zero_threshold > 0 ? opt.zero_threshold : 2 * M_PI / span;

  TwoTimeFit fit;
  fit.nu_resolution = resolution;

  // initial decay from the log-envelope slope over the early window
  const double y0 = std::abs(y[0]) > 0 ? std::abs(y[0]) : 1e-300;
  double g0 = 1.0 / span;
  {
    std::vector<double> ts, ls;
    for (int i = 0; i < m; ++i) {
      double env = std::abs(z[i]);
      if (env > 0.05 * y0) {
        ts.push_back(tau[i]);
        ls.push_back(std::log(env));
      }
    }
    if (ts.size() > 4) {
      double tm = 0, lm = 0;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        tm += ts[i];
        lm += ls[i];
      }
      tm /= ts.size();
      lm /= ts.size();
      double num = 0, den = 0;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        num += (ts[i] - tm) * (ls[i] - lm);
        den += (ts[i] - tm) * (ts[i] - tm);
      }
      if (den > 0 && num < 0) g0 = -num / den;
    }
  }

  // initial frequency from the discrete spectrum peak
  double nu0 = 0;
  {
    const double numax = M_PI / (tau[1] - tau[0]);
    const int ngrid = 4 * m;
    double best = -1;
    for (int k = 0; k <= ngrid; ++k) {
      double nu = numax * k / ngrid;
      cd s = 0;
      for (int i = 0; i < m; ++i) s += y[i] * std::exp(cd(0, -nu * tau[i]));
      double mag = std::abs(s);
      if (mag > best) {
        best = mag;
        nu0 = nu;
      }
    }
  }

  auto res3 = lm_fit(tau, y, y[0], nu0, g0, false, opt.max_iterations);
  if (std::abs(res3.nu) < resolution) {
    auto res2 = lm_fit(tau, y, res3.a, 0.0, std::max(res3.g, 0.0), true, opt.max_iterations);
    fit.amplitude = res2.a;
    fit.nu = 0.0;
    fit.gamma = std::max(0.0, res2.g);
    fit.residual = res2.rms;
    fit.converged = res2.ok;
  } else {
    fit.amplitude = res3.a;
    fit.nu = std::abs(res3.nu);
    fit.gamma = std::max(0.0, res3.g);
    fit.residual = res3.rms;
    fit.converged = res3.ok;
  }
  return fit;
}

FrequencyHistogram frequency_histogram(std::span<const TwoTimeFit> fits, int bins) {
  FrequencyHistogram h;
  if (fits.empty()) return h;
  double numax = 0;
  int entrained = 0;
  for (const auto& f : fits) {
    h.nu_values.push_back(std::abs(f.nu));
    numax = std::max(numax, std::abs(f.nu));
    if (f.nu == 0.0) ++entrained;
  }
  h.entrained_fraction = static_cast<double>(entrained) / fits.size();
  if (numax <= 0) numax = 1.0;
  h.bin_centers.resize(bins);
  h.counts.assign(bins, 0);
  for (int b = 0; b < bins; ++b) h.bin_centers[b] = numax * (b + 0.5) / bins;
  for (double nu : h.nu_values) {
    int b = std::min(bins - 1, static_cast<int>(nu / numax * bins));
    ++h.counts[b];
  }
  return h;
}

}  // namespace radsync
