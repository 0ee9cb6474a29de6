// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Run all criteria with no arguments or a subset by index.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "radsync/collective.hpp"
#include "radsync/cumulant.hpp"
#include "radsync/master_exact.hpp"
#include "radsync/meanfield.hpp"
#include "radsync/observables.hpp"
#include "radsync/run.hpp"
#include "radsync/trajectories.hpp"
#include "radsync/util.hpp"

#include "../test_util.hpp"

using namespace radsync;
using cd = std::complex<double>;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "  ok   " : "  FAIL ") + what);
  }
  void note(const std::string& what) { notes.push_back("       " + what); }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

unsigned workers() { return default_workers(); }

// ---------------------------------------------------------------- criterion 1
Outcome criterion1() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const int n = 200;
  const double f_eff = 15.0;
  auto cm = mean_field_all_to_all(n, f_eff);
  auto arr = DipoleArray::uniform(n);
  const std::vector<double> ws{0.3, 0.8, 1.2, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0,
                               5.5, 6.0, 6.5, 7.0, 7.5, 8.0, 9.0, 10.0, 11.0, 12.5};
  std::vector<double> devs(ws.size());
  parallel_for(ws.size(), workers(), [&](std::size_t i) {
    MfOptions mo;
    mo.t_final = 120.0;
    mo.steady_tol = 1e-8;
    auto series = integrate_mf(BlochState::random_phases(n, 1000 + i), cm, ws[i], arr, mo);
    devs[i] = std::abs(order_parameter(series.states.back()).Z - z_closed_form(f_eff, ws[i], 1.0));
  });
  double worst = 0;
  for (double d : devs) worst = std::max(worst, d);
  out.check(worst < 1e-3, fmt("steady Z vs closed form at 20 W points: max |dZ| = %.2e < 1e-3",
                              worst));

  // threshold boundary located by bisection on the self-consistent solution
  auto sync_at = [&](double w) {
    return self_consistent_solve(f_eff, 0.0, w, 1.0, DetuningDistribution::delta0()).Z > 1e-9;
  };
  auto bisect = [&](double lo, double hi) {
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (sync_at(mid) == sync_at(lo) ? lo : hi) = mid;
      if (hi - lo < 1e-12) break;
    }
    return 0.5 * (lo + hi);
  };
  const double wlo = (13.0 - std::sqrt(105.0)) / 2.0, whi = (13.0 + std::sqrt(105.0)) / 2.0;
  double blo = bisect(1.0, 2.0), bhi = bisect(11.0, 12.0);
  out.check(std::abs(blo - wlo) < 1e-4,
            fmt("lower threshold %.8f vs formula %.8f (|d| = %.1e < 1e-4)", blo, wlo,
                std::abs(blo - wlo)));
  out.check(std::abs(bhi - whi) < 1e-4,
            fmt("upper threshold %.8f vs formula %.8f (|d| = %.1e < 1e-4)", bhi, whi,
                std::abs(bhi - whi)));

  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.check(wall < 60.0, fmt("runtime %.1f s < 60 s", wall));
  return out;
}

// ---------------------------------------------------------------- criterion 2
Outcome criterion2() {
  Outcome out;
  for (double f : {5.0, 15.0, 50.0}) {
    // quadratic-vertex maximization of the (continued) Z^2 parabola
    auto q = [&](double w) { return (f * (w - 1.0) - (w + 1.0) * (w + 1.0)) / (2.0 * f * f); };
    double w1 = f / 2 - 1.5, w2 = f / 2 - 1.0, w3 = f / 2 - 0.5;
    double y1 = q(w1), y2 = q(w2), y3 = q(w3);
    double denom = (w1 - w2) * (w1 - w3) * (w2 - w3);
    double aa = (w3 * (y2 - y1) + w2 * (y1 - y3) + w1 * (y3 - y2)) / denom;
    double bb = (w3 * w3 * (y1 - y2) + w2 * w2 * (y3 - y1) + w1 * w1 * (y2 - y3)) / denom;
    double w_opt = -bb / (2 * aa);
    double z2max = q(w_opt);
    out.check(std::abs(w_opt - (f / 2 - 1.0)) < 1e-10,
              fmt("f_eff = %4.1f: W_opt = %.12f vs f/2 - 1 (|d| = %.1e < 1e-10)", f, w_opt,
                  std::abs(w_opt - (f / 2 - 1.0))));
    out.check(std::abs(z2max - (0.125 - 1.0 / f)) < 1e-10,
              fmt("f_eff = %4.1f: Z^2_max = %.12f vs 1/8 - 1/f (|d| = %.1e < 1e-10)", f, z2max,
                  std::abs(z2max - (0.125 - 1.0 / f))));
  }
  // the 2% proximity clause at f_eff = 50 as stated: Z_max = sqrt(1/8 - 1/50)
  // sits 8.35% below 1/sqrt(8), so this sub-check cannot pass as written
  {
    const double zmax = std::sqrt(0.125 - 1.0 / 50.0);
    const double rel = std::abs(zmax - kMaxZSteady) / kMaxZSteady;
    out.check(rel <= 0.02,
              fmt("f_eff = 50: Z_max = %.6f within 2%% of 1/sqrt(8) = %.6f (actual %.2f%%)",
                  zmax, kMaxZSteady, 100 * rel));
    // supplementary: the formula reaches the 2% band at f_eff ~ 202
    double f2 = 8.0 / (1.0 - 0.98 * 0.98);
    out.note(fmt("supplementary: sqrt(1/8 - 1/f) enters the 2%% band at f_eff = %.0f; "
                 "at f_eff = %.0f the deviation is %.3f%%",
                 f2, f2, 100 * std::abs(std::sqrt(0.125 - 1 / f2) - kMaxZSteady) / kMaxZSteady));
  }
  return out;
}

// ---------------------------------------------------------------- criterion 3
Outcome criterion3() {
  Outcome out;
  const double f = 15.0;
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    double w = 2.0 + 9.0 * i / 9.0;
    for (int j = 0; j < 10; ++j) {
      double delta = 2.25 * j / 9.0;
      auto res = self_consistent_solve(f, 0.0, w, 1.0, DetuningDistribution::lorentzian(delta));
      worst = std::max(worst, std::abs(res.Z - z_lorentzian(f, w, 1.0, delta)));
    }
  }
  out.check(worst < 1e-6, fmt("self-consistent vs closed form on the 10x10 (W, Delta) grid: "
                              "max |dZ| = %.2e < 1e-6", worst));

  double worst_dc = 0;
  for (double w : {4.0, 6.0, 8.0, 10.0}) {
    double dc = delta_critical(f, w, 1.0);
    auto res = self_consistent_solve(f, 0.0, w, 1.0, DetuningDistribution::lorentzian(dc));
    worst_dc = std::max(worst_dc, res.Z);
  }
  out.check(worst_dc < 1e-6, fmt("Z at the critical width: max Z = %.2e < 1e-6", worst_dc));

  double worst_w = 0;
  for (double g : {0.5, 2.0, -1.5})
    for (double w : {3.0, 6.0}) {
      auto res = self_consistent_solve(f, g, w, 1.0, DetuningDistribution::delta0());
      worst_w = std::max(worst_w, std::abs(res.omega_bar - g * (1.0 + w) / (2.0 * f)));
    }
  out.check(worst_w < 1e-8,
            fmt("collective shift omega_bar vs g_eff(gamma+W)/(2 f_eff): max |d| = %.2e < 1e-8",
                worst_w));
  return out;
}

// ---------------------------------------------------------------- criterion 4
Outcome criterion4() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(0.4 * i);
  EvolveOptions eo;
  eo.rtol = 1e-11;
  eo.atol = 1e-14;
  for (int n = 2; n <= 6; ++n) {
    const double f_eff = 0.9 * n, w = 1.5;
    Liouvillian liouv(DipoleArray::uniform(n), collective_couplings(n, f_eff), w);
    SymmetricGenerator gen(n, f_eff, w);
    auto ex = evolve(all_down_density(n), liouv, grid, eo);
    auto sy = evolve_symmetric(gen, gen.all_down(), grid, eo);
    double dev = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      dev = std::max(dev, std::abs(mean_sz(ex.states[i]) - gen.expect_sz(sy.states[i])));
      auto zx = zq_of_density(ex.states[i]);
      double zs = gen.zq(sy.states[i]);
      dev = std::max(dev, std::abs(zx.zq - zs));
    }
    out.check(dev < 1e-8, fmt("N = %d: sup-norm over <sz> and Z_Q series = %.2e < 1e-8", n, dev));
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.check(wall < 120.0, fmt("runtime %.1f s < 120 s", wall));
  return out;
}

// ---------------------------------------------------------------- criterion 5
Outcome criterion5() {
  Outcome out;
  // N = 2 equivalence (closure vacuous)
  {
    auto arr = build_chain(2, 0.08, kMagicAngle, {0.2, -0.4});
    auto cm = coupling_matrices(arr, {CouplingMode::dipolar, 0, 0, 0});
    const double w = 1.3;
    Liouvillian liouv(arr, cm, w);
    std::vector<double> grid;
    for (int i = 1; i <= 16; ++i) grid.push_back(0.5 * i);
    EvolveOptions eo;
    eo.rtol = 1e-11;
    eo.atol = 1e-14;
    auto ex = evolve(all_down_density(2), liouv, grid, eo);
    CumulantOptions co;
    co.rtol = 1e-11;
    co.atol = 1e-14;
    auto cu = evolve_cumulant(CumulantState::all_down(2), cm, w, arr, grid, co);
    double dev = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      auto mom = CumulantState::from_density_matrix(ex.states[i]);
      dev = std::max(dev, (mom.s - cu.states[i].s).cwiseAbs().maxCoeff());
      dev = std::max(dev, (mom.P - cu.states[i].P).cwiseAbs().maxCoeff());
    }
    out.check(dev < 1e-6, fmt("N = 2 exact equivalence: max moment deviation %.2e < 1e-6", dev));
  }

  // N = 70 collective, W in [gamma, 30 gamma]
  {
    const int n = 70;
    const double f_eff = 15.0;
    const std::vector<double> ws{1.0, 2.5, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0};
    auto cm = collective_couplings(n, f_eff);
    auto arr = DipoleArray::uniform(n);
    std::vector<double> zc(ws.size()), zs(ws.size());
    parallel_for(ws.size(), workers(), [&](std::size_t i) {
      CumulantOptions co;
      co.u1_reduction = true;
      zc[i] = zq_all(steady_cumulant(cm, ws[i], arr, co).state).zq;
      SymmetricGenerator gen(n, f_eff, ws[i]);
      zs[i] = gen.zq(steady_symmetric(gen).d);
    });
    bool all_ok = true;
    double worst = 0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      double rel = std::abs(zc[i] - zs[i]) / std::max(zs[i], 1e-3);
      worst = std::max(worst, rel);
      if (rel > 0.05) all_ok = false;
      out.note(fmt("W = %5.2f: Z_Q cumulant %.5f vs symmetric %.5f (rel %.3f, abs %.4f)", ws[i],
                   zc[i], zs[i], rel, std::abs(zc[i] - zs[i])));
    }
    out.check(all_ok, fmt("N = 70 steady Z_Q within 5%% of the symmetric engine over "
                          "W in [1, 30] (worst %.1f%%)", 100 * worst));
  }

  // documented subradiant disagreement at W = 0.05
  {
    const int n = 70;
    auto cm = collective_couplings(n, 15.0);
    auto arr = DipoleArray::uniform(n);
    CumulantOptions co;
    co.u1_reduction = true;
    co.t_max = 800.0;
    double raw_c = zq_all(steady_cumulant(cm, 0.05, arr, co).state).raw_re;
    SymmetricGenerator gen(n, 15.0, 0.05);
    SteadyStateOptions so;
    so.t_max = 800.0;
    double raw_s = gen.pair_pm(steady_symmetric(gen, so).d);
    out.check(raw_s < 0.0,
              fmt("W = 0.05: symmetric pair correlator subradiant (%.3e < 0), cumulant gives "
                  "%.3e; disagreement documented", raw_s, raw_c));
  }
  return out;
}

// ---------------------------------------------------------------- criterion 6
Outcome criterion6() {
  Outcome out;
  const int n = 30;
  const double f_eff = 15.0;
  std::vector<double> ws;
  for (int i = 0; i < 16; ++i) ws.push_back(0.2 * std::pow(40.0 / 0.2, i / 15.0));
  std::vector<double> zq(ws.size());
  parallel_for(ws.size(), workers(), [&](std::size_t i) {
    SymmetricGenerator gen(n, f_eff, ws[i]);
    zq[i] = gen.zq(steady_symmetric(gen).d);
  });
  std::size_t peak = 0;
  for (std::size_t i = 0; i < ws.size(); ++i)
    if (zq[i] > zq[peak]) peak = i;
  bool unimodal = true;
  for (std::size_t i = 1; i <= peak; ++i) unimodal = unimodal && zq[i] >= zq[i - 1] - 1e-9;
  for (std::size_t i = peak + 1; i < ws.size(); ++i)
    unimodal = unimodal && zq[i] <= zq[i - 1] + 1e-9;
  out.check(unimodal, "Z_Q(W) is unimodal across the scan");
  out.check(ws[peak] >= f_eff / 4 && ws[peak] <= f_eff,
            fmt("peak location W = %.2f inside [f_eff/4, f_eff] = [3.75, 15]", ws[peak]));
  out.check(zq[peak] >= 0.2 && zq[peak] <= kMaxZSteady,
            fmt("peak value %.4f inside [0.2, 1/sqrt(8)]", zq[peak]));
  SymmetricGenerator gen40(n, f_eff, 40.0);
  double z40 = gen40.zq(steady_symmetric(gen40).d);
  out.check(z40 < 0.05, fmt("Z_Q(W = 40) = %.4f < 0.05", z40));
  if (z40 >= 0.05) {
    // finite-size residual: the overpumped pair correlator scales like
    // f_eff/(N (W - f_eff)), so the 0.05 level needs N well above 30
    SymmetricGenerator big(150, f_eff, 40.0);
    double zbig = big.zq(steady_symmetric(big).d);
    out.note(fmt("supplementary: Z_Q(W = 40) = %.4f at N = 150 (finite-size residual "
                 "~ sqrt(f_eff/(N(W - f_eff))) = %.3f at N = 30)", zbig,
                 std::sqrt(f_eff / (n * (40.0 - f_eff)))));
  }
  return out;
}

// ---------------------------------------------------------------- criterion 7
Outcome criterion7() {
  Outcome out;
  const int n = 6;
  const double f_eff = 6.0, w = 3.0;
  auto arr = DipoleArray::uniform(n);
  auto cm = collective_couplings(n, f_eff);
  Liouvillian liouv(arr, cm, w);
  SteadyStateOptions so;
  so.drift_tol = 1e-10;
  auto exact_pair = [&]() {
    auto rho = steady_state(liouv, so).rho;
    Eigen::Matrix4cd acc = Eigen::Matrix4cd::Zero();
    int cnt = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b) {
          acc += pair_reduced_state(rho, a, b);
          ++cnt;
        }
    return Eigen::Matrix4cd((acc / cnt).eval());
  }();

  auto run_m = [&](int m, std::uint64_t seed) {
    JumpOptions jo;
    jo.trajectories = m;
    jo.t_burn = 12.0;
    jo.t_end = 42.0;
    jo.sample_dt = 0.75;
    jo.seed = seed;
    jo.workers = workers();
    jo.collect_pair_state = true;
    return run_jump_ensemble(arr, cm, w, jo);
  };

  auto mean_pair = [](const std::vector<TrajectoryRecord>& recs,
                      const std::vector<int>& idx) {
    Eigen::Matrix4cd acc = Eigen::Matrix4cd::Zero();
    for (int i : idx) acc += recs[i].pair_state;
    return Eigen::Matrix4cd((acc / double(idx.size())).eval());
  };

  std::vector<int> ms{250, 1000, 4000};
  std::vector<double> tds;
  double se_boot_4000 = 0;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    auto recs = run_m(ms[k], 500 + k);
    std::vector<int> all(ms[k]);
    for (int i = 0; i < ms[k]; ++i) all[i] = i;
    double td = trace_distance(mean_pair(recs, all), exact_pair);
    tds.push_back(td);
    if (ms[k] == 4000) {
      std::mt19937_64 rng(4242);
      std::uniform_int_distribution<int> pick(0, ms[k] - 1);
      std::vector<double> boot;
      for (int b = 0; b < 200; ++b) {
        std::vector<int> idx(ms[k]);
        for (int i = 0; i < ms[k]; ++i) idx[i] = pick(rng);
        boot.push_back(trace_distance(mean_pair(recs, idx), exact_pair));
      }
      double mu = 0;
      for (double v : boot) mu += v;
      mu /= boot.size();
      double ss = 0;
      for (double v : boot) ss += (v - mu) * (v - mu);
      se_boot_4000 = std::sqrt(ss / (boot.size() - 1));
    }
  }
  out.check(tds[2] < 3.0 * se_boot_4000,
            fmt("M = 4000 trace distance %.3e < 3 bootstrap SE (%.3e)", tds[2],
                3.0 * se_boot_4000));
  double slope = std::log(tds[2] / tds[0]) / std::log(double(ms[2]) / ms[0]);
  out.check(slope > -0.75 && slope < -0.25,
            fmt("O(M^-1/2) scaling: td(250) = %.3e, td(1000) = %.3e, td(4000) = %.3e, "
                "slope %.2f in [-0.75, -0.25]", tds[0], tds[1], tds[2], slope));
  return out;
}

// ---------------------------------------------------------------- criterion 8
Outcome criterion8() {
  Outcome out;
  const int n = 10;
  const double f_eff = 15.0, w = 7.5;
  auto arr = DipoleArray::uniform(n);
  auto cm = dicke_couplings(n, f_eff);

  QsdOptions qo;
  qo.trajectories = 200;
  qo.t_burn = 4.0;
  qo.t_end = 6.0;
  qo.sample_dt = 0.25;
  qo.seed = 8080;
  qo.workers = workers();
  qo.collect_fq = true;
  qo.accumulate_rho = true;
  auto res = run_qsd_ensemble(arr, cm, w, qo);
  std::vector<double> fq;
  double fq_max = 0;
  for (const auto& r : res.records) {
    fq.push_back(r.fq);
    fq_max = std::max(fq_max, r.fq_max);
  }
  auto ms = reduce_mean_se(fq);
  const double floor_sep = 2.0 * n / 3.0;         // separable bound
  const double ceil_ghz = (n * n + 2.0 * n) / 3.0;  // witness ceiling
  out.check(ms.mean - floor_sep > 3.0 * ms.se,
            fmt("conditional QFI %.3f +- %.3f exceeds 2N/3 = %.3f by %.1f SE (M = 200, "
                "dt = %.2e)", ms.mean, ms.se, floor_sep, (ms.mean - floor_sep) / ms.se,
                res.dt_used));
  out.check(fq_max <= ceil_ghz + 1e-9,
            fmt("largest sampled conditional QFI %.3f never exceeds (N^2+2N)/3 = %.3f", fq_max,
                ceil_ghz));

  // ensemble-averaged density matrix: exact master-equation steady state of
  // this permutation-symmetric system, expanded to the full 2^N space
  SymmetricGenerator gen(n, f_eff, w, f_eff / n);
  auto sy = steady_symmetric(gen);
  auto rho_exact = gen.full_density_matrix(sy.d);
  double fq_mixed = ensemble_qfi_mixed(rho_exact);
  out.check(fq_mixed <= floor_sep,
            fmt("ensemble-averaged-rho QFI %.3f <= 2N/3 = %.3f", fq_mixed, floor_sep));
  double fq_traj_rho = ensemble_qfi_mixed(res.rho_mean, 1e-9);
  out.note(fmt("trajectory-averaged rho QFI %.3f (consistency; trace distance to exact %.3e)",
               fq_traj_rho, trace_distance(res.rho_mean, rho_exact)));
  return out;
}

// ---------------------------------------------------------------- criterion 9
Outcome criterion9() {
  Outcome out;
  SymmetricGenerator gen(30, 15.0, 7.5);
  auto ps = gen.reduced_pair_state(steady_symmetric(gen).d);
  auto d = quantum_discord(ps);
  out.check(d.discord > 0.0 && d.discord <= d.mutual_information &&
                d.mutual_information <= 2.0,
            fmt("steady pair state: 0 < D = %.4f <= I = %.4f <= 2", d.discord,
                d.mutual_information));

  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::Matrix4cd rho = radsync::testing::random_product_density(2, 7000 + rep);
    worst = std::max(worst, quantum_discord(rho).discord);
  }
  out.check(worst < 1e-6, fmt("discord of 100 random product states: max %.2e < 1e-6", worst));

  Eigen::Vector4cd bell = Eigen::Vector4cd::Zero();
  bell[0] = bell[3] = 1.0 / std::sqrt(2.0);
  auto db = quantum_discord(bell * bell.adjoint());
  out.check(std::abs(db.discord - 1.0) < 1e-4,
            fmt("Bell-state discord %.6f within 1e-4 of 1", db.discord));
  return out;
}

// --------------------------------------------------------------- criterion 10
Outcome criterion10() {
  Outcome out;
  auto golden = [](const std::function<double(double)>& fn, double lo, double hi) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi, c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = fn(c), fd = fn(d);
    for (int it = 0; it < 30 && (b - a) > 0.02 * (hi - lo); ++it) {
      if (fc > fd) {
        b = d; d = c; fd = fc; c = b - gr * (b - a); fc = fn(c);
      } else {
        a = c; c = d; fc = fd; d = a + gr * (b - a); fd = fn(d);
      }
    }
    return 0.5 * (a + b);
  };

  // cluster order parameters on the N = 64 chain at per-alpha optimal W
  auto arr64 = build_lattice({1, 64}, 0.08, {0, 0, 1});
  auto cluster_scan = [&](double alpha) {
    auto cm = coupling_matrices(arr64, {CouplingMode::powerlaw, 0.0, alpha, 0.25});
    CumulantOptions co;
    co.u1_reduction = true;
    auto zq_of_w = [&](double w) {
      return zq_all(steady_cumulant(cm, w, arr64, co).state).zq;
    };
    double w_opt = golden(zq_of_w, 0.2, 1.5 * cm.f_eff);
    auto ss = steady_cumulant(cm, w_opt, arr64, co);
    std::vector<double> zqd;
    for (int d : {2, 4, 8, 16, 32}) zqd.push_back(zq_cluster(ss.state, d, arr64).zq);
    return std::pair{w_opt, zqd};
  };

  {
    auto [w_opt, zqd] = cluster_scan(0.25);
    double mn = zqd[0], mx = zqd[0], mean = 0;
    for (double z : zqd) {
      mn = std::min(mn, z);
      mx = std::max(mx, z);
      mean += z;
    }
    mean /= zqd.size();
    double spread = (mx - mn) / mean;
    out.check(spread < 0.02,
              fmt("alpha = 0.25 (W_opt = %.2f): Z_Q^d flat within 2%% over d = 2..32 "
                  "(spread %.2f%%)", w_opt, 100 * spread));
  }
  {
    auto [w_opt, zqd] = cluster_scan(2.0);
    bool monotone = true;
    for (std::size_t i = 1; i < zqd.size(); ++i)
      monotone = monotone && zqd[i] <= zqd[i - 1] + 1e-3;
    double drop = 1.0 - zqd.back() / zqd.front();
    out.check(monotone && drop > 0.5,
              fmt("alpha = 2 (W_opt = %.2f): monotone decay with %.0f%% drop by d = 32 "
                  "(Z_2 = %.4f, Z_32 = %.4f)", w_opt, 100 * drop, zqd.front(), zqd.back()));
  }

  // entrained fractions on a detuned N = 100 chain, W = f_eff/2 per alpha
  {
    std::vector<double> alphas{0.0, 0.65, 2.0};
    std::vector<double> fractions(alphas.size());
    std::mt19937_64 rng(9001);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<double> detunings(100);
    for (auto& d : detunings) d = u(rng);
    parallel_for(alphas.size(), workers(), [&](std::size_t i) {
      auto arr = build_lattice({1, 100}, 0.08, {0, 0, 1}, detunings);
      auto cm = coupling_matrices(arr, {CouplingMode::powerlaw, 0.0, alphas[i], 0.25});
      CumulantOptions co;
      co.u1_reduction = true;
      const double w = 0.5 * cm.f_eff;
      auto ss = steady_cumulant(cm, w, arr, co);
      const int a = central_site(arr);
      std::vector<int> partners;
      for (int b = 0; b < 100; ++b)
        if (b != a) partners.push_back(b);
      // window resolving nu down to 0.01 gamma
      const double span = 2 * M_PI / 0.01;
      const int nsamp = 640;
      std::vector<double> grid(nsamp);
      for (int k = 0; k < nsamp; ++k) grid[k] = span * k / (nsamp - 1);
      auto series = two_time_cumulant_all(ss.state, cm, arr, w, a, partners, grid);
      std::vector<TwoTimeFit> fits(partners.size());
      for (std::size_t p = 0; p < partners.size(); ++p)
        fits[p] = fit_two_time(grid, series[p]);
      fractions[i] = frequency_histogram(fits).entrained_fraction;
    });
    out.note(fmt("entrained fractions: alpha 0 -> %.3f, 0.65 -> %.3f, 2 -> %.3f", fractions[0],
                 fractions[1], fractions[2]));
    out.check(fractions[0] > 0.999, "alpha = 0: all pairs entrained");
    out.check(fractions[1] < fractions[0] && fractions[1] > fractions[2],
              "alpha = 0.65: intermediate entrained fraction");
    out.check(fractions[2] < 0.5, "alpha = 2: entrained pairs in the minority");
  }
  return out;
}

// --------------------------------------------------------------- criterion 11
Outcome criterion11() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const int n = 12;
  struct Point {
    double theta, spacing;
  };
  std::vector<Point> grid{{0.0, 0.05},        {0.0, 0.08},        {M_PI / 4, 0.08},
                          {kMagicAngle, 0.05}, {kMagicAngle, 0.08}, {kMagicAngle, 0.12},
                          {M_PI / 2, 0.08}};
  std::vector<double> zq(grid.size()), gmax(grid.size()), feffs(grid.size()), ses(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto arr = build_chain(n, grid[i].spacing, grid[i].theta);
    auto cm = coupling_matrices(arr, {CouplingMode::dipolar, 0, 0, 0});
    feffs[i] = cm.f_eff;
    Eigen::MatrixXd goff = cm.g;
    goff.diagonal().setZero();
    gmax[i] = goff.cwiseAbs().maxCoeff();
    JumpOptions jo;
    jo.trajectories = 48;
    jo.t_burn = 10.0;
    jo.t_end = 34.0;
    jo.sample_dt = 0.5;
    jo.seed = 1100 + i;
    jo.workers = workers();
    // per-segment propagation error far below the few-percent sampling noise
    jo.krylov_tol = 1e-7;
    auto recs = run_jump_ensemble(arr, cm, 0.5 * cm.f_eff, jo);
    std::vector<double> pr;
    for (const auto& r : recs) pr.push_back(r.pair_pm.real());
    auto pm = reduce_mean_se(pr);
    zq[i] = pm.mean > 0 ? std::sqrt(pm.mean) : 0.0;
    ses[i] = pm.se;
    out.note(fmt("theta = %.3f, a/lambda = %.2f: f_eff = %5.2f, g_max = %8.2f, Z_Q = %.4f "
                 "(pair SE %.1e)", grid[i].theta, grid[i].spacing, feffs[i], gmax[i], zq[i],
                 pm.se));
  }

  // reference: identically coupled system with the same f_eff at theta_m
  const std::size_t im = 4;  // (theta_m, 0.08)
  SymmetricGenerator gen(n, feffs[im], 0.5 * feffs[im]);
  double z_ref = gen.zq(steady_symmetric(gen).d);
  double rel = std::abs(zq[im] - z_ref) / z_ref;
  out.check(rel <= 0.20,
            fmt("Z_Q at the magic angle %.4f within 20%% of the equivalent collective run %.4f "
                "(deviation %.1f%%)", zq[im], z_ref, 100 * rel));

  double zmin = zq[0], zmax = zq[0], gmin = gmax[0], gmx = gmax[0];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    zmin = std::min(zmin, zq[i]);
    zmax = std::max(zmax, zq[i]);
    gmin = std::min(gmin, gmax[i]);
    gmx = std::max(gmx, gmax[i]);
  }
  out.check(gmx / gmin >= 100.0,
            fmt("scanned g_max spans %.0fx (%.2f .. %.2f)", gmx / gmin, gmin, gmx));
  out.check(zmax / zmin < 2.0,
            fmt("Z_Q varies by a factor %.2f < 2 across the grid (%.4f .. %.4f)", zmax / zmin,
                zmin, zmax));
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.check(wall < 7200.0, fmt("runtime %.0f s < 7200 s", wall));
  return out;
}

// --------------------------------------------------------------- criterion 12
Outcome criterion12() {
  Outcome out;
  using mp = boost::multiprecision::cpp_bin_float_50;
  auto oracle_f = [](mp zeta, mp theta) {
    mp s2 = sin(theta) * sin(theta), c2 = cos(theta) * cos(theta);
    mp a = sin(zeta) / (zeta * zeta * zeta) - cos(zeta) / (zeta * zeta);
    return mp(3) / 2 * (s2 * sin(zeta) / zeta + (3 * c2 - 1) * a);
  };
  auto oracle_g = [](mp zeta, mp theta) {
    mp s2 = sin(theta) * sin(theta), c2 = cos(theta) * cos(theta);
    mp b = cos(zeta) / (zeta * zeta * zeta) + sin(zeta) / (zeta * zeta);
    return -mp(3) / 2 * (s2 * cos(zeta) / zeta + (3 * c2 - 1) * b);
  };
  std::mt19937_64 rng(314159);
  std::uniform_real_distribution<double> uz(std::log(1e-3), std::log(30.0));
  std::uniform_real_distribution<double> uth(0.0, M_PI);
  double worst_f = 0, worst_g = 0;
  for (int i = 0; i < 1000; ++i) {
    double z = std::exp(uz(rng)), th = uth(rng);
    mp wf = oracle_f(mp(z), mp(th)), wg = oracle_g(mp(z), mp(th));
    mp sf = abs(mp(3) / 2 * sin(mp(th)) * sin(mp(th)) * sin(mp(z)) / mp(z)) + abs(wf);
    mp sg = abs(mp(3) / 2 * sin(mp(th)) * sin(mp(th)) * cos(mp(z)) / mp(z)) + abs(wg);
    auto rel = [](double got, mp want, mp scale) {
      mp denom = abs(want);
      mp fl = abs(scale) * mp(1e-9);
      if (denom < fl) denom = fl;
      return static_cast<double>(abs(mp(got) - want) / denom);
    };
    worst_f = std::max(worst_f, rel(kernel_f_theta(z, th, 1.0), wf, sf));
    worst_g = std::max(worst_g, rel(kernel_g_theta(z, th, 1.0), wg, sg));
  }
  out.check(worst_f < 1e-12,
            fmt("inelastic kernel vs 50-digit oracle on 1000 points: worst %.2e < 1e-12",
                worst_f));
  out.check(worst_g < 1e-12,
            fmt("elastic kernel vs 50-digit oracle on 1000 points: worst %.2e < 1e-12",
                worst_g));
  out.check(3.0 * (1.0 / 3.0) - 1.0 == 0.0 &&
                kernel_g(0.7, 1.0 / 3.0, 1.0) == -1.5 * ((1.0 - 1.0 / 3.0) * std::cos(0.7) / 0.7),
            "magic-angle angular factor vanishes identically");
  double worst_lim = 0;
  for (double th : {0.0, 0.4, kMagicAngle, M_PI / 2})
    worst_lim = std::max(worst_lim, std::abs(kernel_f_theta(1e-7, th, 1.0) - 1.0));
  out.check(worst_lim < 1e-10,
            fmt("f(zeta -> 0) = gamma limit: worst deviation %.2e < 1e-10", worst_lim));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"mean-field ODE matches the closed-form order parameter", criterion1}},
      {2, {"optimum structure of the closed form", criterion2}},
      {3, {"Lorentzian spread and collective frequency shift", criterion3}},
      {4, {"engine equivalence: exact vs permutation-symmetric", criterion4}},
      {5, {"cumulant validity window", criterion5}},
      {6, {"quantum phase diagram shape", criterion6}},
      {7, {"jump-trajectory convergence to the exact steady state", criterion7}},
      {8, {"conditional-QFI entanglement witness", criterion8}},
      {9, {"pair correlation metrics", criterion9}},
      {10, {"power-law coupling regimes", criterion10}},
      {11, {"anisotropic chain robustness", criterion11}},
      {12, {"kernel correctness against the high-precision oracle", criterion12}},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--list") == 0) {
      for (auto& [k, v] : criteria) std::printf("%2d  %s\n", k, v.first);
      return 0;
    }
    selected.push_back(std::atoi(argv[i]));
  }
  if (selected.empty())
    for (auto& [k, v] : criteria) selected.push_back(k);

  int failures = 0;
  for (int k : selected) {
    auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("  FAIL exception: ") + e.what());
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", k,
                it->second.first, wall);
    for (const auto& line : o.notes) std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(selected.size()) - failures,
              selected.size());
  return failures == 0 ? 0 : 1;
}
