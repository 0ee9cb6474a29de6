#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>

#include "radsync/meanfield.hpp"

using namespace radsync;

namespace {

// Polar-form right-hand sides (amplitude/phase variables), valid away from
// S_perp = 0; the independent route the Cartesian derivatives must match.
struct Polar {
  double sp, phi, sz;
};

std::vector<Polar> polar_rhs(const std::vector<Polar>& st, const CouplingMatrices& cm, double w,
                             const DipoleArray& arr) {
  const int n = static_cast<int>(st.size());
  std::vector<Polar> d(n);
  const double gam = arr.gamma;
  for (int a = 0; a < n; ++a) {
    double sum_sz = 0, sum_sp = 0, sum_phi = 0;
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      const double dphi = st[b].phi - st[a].phi;
      sum_sz += st[b].sp * (cm.f(a, b) * std::cos(dphi) - cm.g(a, b) * std::sin(dphi));
      sum_sp += st[b].sp * (cm.g(a, b) * std::sin(dphi) - cm.f(a, b) * std::cos(dphi));
      sum_phi += (st[b].sp / st[a].sp) *
                 (cm.g(a, b) * std::cos(dphi) + cm.f(a, b) * std::sin(dphi));
    }
    d[a].sz = -st[a].sp * sum_sz - gam * (0.5 + st[a].sz) + w * (0.5 - st[a].sz);
    d[a].sp = -st[a].sz * sum_sp - 0.5 * (gam + w) * st[a].sp;
    d[a].phi = -arr.detunings[a] + st[a].sz * sum_phi;
  }
  return d;
}

}  // namespace

TEST_CASE("pure decay: all spins up lose inversion at rate gamma") {
  auto arr = DipoleArray::uniform(3);
  auto cm = collective_couplings(3, 6.0);
  BlochState s = BlochState::all_up(3);
  BlochState d = BlochState::zero(3);
  mf_derivatives(s, cm, 0.7, arr, d);
  for (int a = 0; a < 3; ++a) {
    CHECK(d.sz[a] == doctest::Approx(-1.0).epsilon(1e-14));  // -gamma(1/2+1/2)
    CHECK(d.sx[a] == 0.0);
    CHECK(d.sy[a] == 0.0);
  }
}

TEST_CASE("pump-decay balance at W = gamma holds the origin") {
  auto arr = DipoleArray::uniform(2);
  auto cm = collective_couplings(2, 4.0);
  BlochState s = BlochState::zero(2);
  BlochState d = BlochState::zero(2);
  mf_derivatives(s, cm, 1.0, arr, d);
  CHECK(d.sz.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.sx.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Cartesian derivatives match the polar equations away from S_perp = 0") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 5;
  auto arr = build_chain(n, 0.08, 0.6, {0.2, -0.1, 0.0, 0.3, -0.25});
  auto cm = coupling_matrices(arr, {CouplingMode::dipolar, 0, 0, 0});
  const double w = 1.7;

  std::vector<Polar> pol(n);
  BlochState cart = BlochState::zero(n);
  for (int a = 0; a < n; ++a) {
    pol[a].sp = 0.1 + 0.35 * u(rng);
    pol[a].phi = 2 * M_PI * u(rng);
    pol[a].sz = 0.4 * (u(rng) - 0.5);
    cart.sx[a] = pol[a].sp * std::cos(pol[a].phi);
    cart.sy[a] = pol[a].sp * std::sin(pol[a].phi);
    cart.sz[a] = pol[a].sz;
  }
  BlochState dc = BlochState::zero(n);
  mf_derivatives(cart, cm, w, arr, dc);
  auto dp = polar_rhs(pol, cm, w, arr);
  for (int a = 0; a < n; ++a) {
    // chain rule: dSx = dSp cos - Sp sin dphi, dSy = dSp sin + Sp cos dphi
    double want_dx = dp[a].sp * std::cos(pol[a].phi) -
                     pol[a].sp * std::sin(pol[a].phi) * dp[a].phi;
    double want_dy = dp[a].sp * std::sin(pol[a].phi) +
                     pol[a].sp * std::cos(pol[a].phi) * dp[a].phi;
    CHECK(dc.sx[a] == doctest::Approx(want_dx).epsilon(1e-10));
    CHECK(dc.sy[a] == doctest::Approx(want_dy).epsilon(1e-10));
    CHECK(dc.sz[a] == doctest::Approx(dp[a].sz).epsilon(1e-10));
  }
}

TEST_CASE("in-phase collective pair: phase frozen, amplitude rate as derived") {
  // both spins identical, f_12 = f_eff/2; transverse growth rate
  // Sz f_12 Sperp - (gamma+W)/2 Sperp and no phase motion
  const double f_eff = 15.0, w = 6.5;
  auto arr = DipoleArray::uniform(2);
  auto cm = collective_couplings(2, f_eff);
  BlochState s = BlochState::zero(2);
  for (int a = 0; a < 2; ++a) {
    s.sx[a] = 0.3;
    s.sy[a] = 0.0;
    s.sz[a] = 0.2;
  }
  BlochState d = BlochState::zero(2);
  mf_derivatives(s, cm, w, arr, d);
  const double want = 0.2 * (f_eff / 2) * 0.3 - 0.5 * (1 + w) * 0.3;
  for (int a = 0; a < 2; ++a) {
    CHECK(d.sx[a] == doctest::Approx(want).epsilon(1e-12));
    CHECK(d.sy[a] == doctest::Approx(0.0).epsilon(1e-14));  // dphi = 0
  }
}

TEST_CASE("single dipole decay solution from the integrator") {
  auto arr = DipoleArray::uniform(1);
  CouplingMatrices cm;
  cm.f = Eigen::MatrixXd::Constant(1, 1, 1.0);
  cm.g = Eigen::MatrixXd::Zero(1, 1);
  BlochState s0 = BlochState::zero(1);
  s0.sz[0] = 0.5;
  MfOptions opt;
  opt.t_final = 3.0;
  opt.steady_tol = 0;  // fixed horizon
  opt.sample_times = {1.0, 2.0, 3.0};
  auto series = integrate_mf(s0, cm, 0.0, arr, opt);
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    double t = series.t[i];
    CHECK(series.states[i].sz[0] == doctest::Approx(-0.5 + std::exp(-t)).epsilon(1e-9));
  }
}

TEST_CASE("closed-form order parameter: frozen value, threshold, optimum") {
  CHECK(z_closed_form(15.0, 6.5, 1.0) == doctest::Approx(0.24152294576982398).epsilon(1e-14));
  CHECK(z_closed_form(15.0, 1.0, 1.0) == 0.0);  // radicand negative at W = gamma
  CHECK(z_closed_form(15.0, 0.2, 1.0) == 0.0);
  // threshold boundary roots for f_eff = 15: W = (13 +- sqrt(105))/2
  const double wlo = (13.0 - std::sqrt(105.0)) / 2.0, whi = (13.0 + std::sqrt(105.0)) / 2.0;
  CHECK(z_closed_form(15.0, wlo - 1e-9, 1.0) == 0.0);
  CHECK(z_closed_form(15.0, wlo + 1e-6, 1.0) > 0.0);
  CHECK(z_closed_form(15.0, whi - 1e-6, 1.0) > 0.0);
  CHECK(z_closed_form(15.0, whi + 1e-9, 1.0) == 0.0);
  // exact synchronization criterion f(W-1) > (W+1)^2
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uf(1.0, 60.0), uw(0.0, 40.0);
  for (int i = 0; i < 300; ++i) {
    double f = uf(rng), w = uw(rng);
    bool sync = f * (w - 1.0) > (w + 1.0) * (w + 1.0);
    CHECK((z_closed_form(f, w, 1.0) > 0.0) == sync);
  }
}

TEST_CASE("optimum structure: parabola vertex matches f/2 - 1 and 1/8 - 1/f") {
  for (double f : {5.0, 15.0, 50.0}) {
    // Z^2 continues to the downward parabola (f(W-1) - (W+1)^2) / (2 f^2)
    // below threshold (f = 5 has an empty synchronized window), so the
    // three-point quadratic vertex is the numeric maximizer
    auto z2 = [&](double w) {
      double q = (f * (w - 1.0) - (w + 1.0) * (w + 1.0)) / (2.0 * f * f);
      if (q > 0) {
        double z = z_closed_form(f, w, 1.0);
        CHECK(z * z == doctest::Approx(q).epsilon(1e-12));
      } else {
        CHECK(z_closed_form(f, w, 1.0) == 0.0);
      }
      return q;
    };
    double w1 = f / 2 - 1.5, w2 = f / 2 - 1.0, w3 = f / 2 - 0.5;
    double y1 = z2(w1), y2 = z2(w2), y3 = z2(w3);
    double denom = (w1 - w2) * (w1 - w3) * (w2 - w3);
    double aa = ((w3 * (y2 - y1) + w2 * (y1 - y3) + w1 * (y3 - y2)) / denom);
    double bb = (w3 * w3 * (y1 - y2) + w2 * w2 * (y3 - y1) + w1 * w1 * (y2 - y3)) / denom;
    double w_opt = -bb / (2 * aa);
    CHECK(std::abs(w_opt - (f / 2 - 1.0)) < 1e-10);
    CHECK(std::abs(z2(w_opt) - (0.125 - 1.0 / f)) < 1e-12);
  }
}

TEST_CASE("z approaches 1/sqrt(8) from below as f_eff grows") {
  double prev = 0;
  for (double f : {10.0, 30.0, 100.0, 1000.0, 1e5}) {
    double z = z_closed_form(f, f / 2 - 1.0, 1.0);
    CHECK(z < kMaxZSteady);
    CHECK(z > prev);
    prev = z;
  }
  CHECK(prev == doctest::Approx(kMaxZSteady).epsilon(1e-4));
}

TEST_CASE("Lorentzian spread reduces to the closed form at zero width") {
  for (double w : {2.0, 5.0, 9.0}) {
    CHECK(z_lorentzian(15.0, w, 1.0, 0.0) ==
          doctest::Approx(z_closed_form(15.0, w, 1.0)).epsilon(1e-14));
  }
}

TEST_CASE("synchronization is destroyed exactly at the critical width") {
  const double f = 15.0, w = 6.0;
  const double dc = delta_critical(f, w, 1.0);
  CHECK(dc == doctest::Approx(1.8571428571428571).epsilon(1e-14));
  CHECK(z_lorentzian(f, w, 1.0, dc) < 1e-12);
  CHECK(z_lorentzian(f, w, 1.0, dc * 0.98) > 0.0);
  CHECK(z_lorentzian(f, w, 1.0, dc * 1.02) == 0.0);
  // frozen oracle value away from the edge
  CHECK(z_lorentzian(15.0, 6.0, 1.0, 1.0) ==
        doctest::Approx(0.15322027879883920).epsilon(1e-13));
}

TEST_CASE("self-consistent solve collapses to the closed forms at zero spread") {
  for (double w : {2.5, 6.5, 9.0}) {
    auto res = self_consistent_solve(15.0, 0.0, w, 1.0, DetuningDistribution::delta0());
    CHECK(res.Z == doctest::Approx(z_closed_form(15.0, w, 1.0)).epsilon(1e-10));
    CHECK(std::abs(res.omega_bar) < 1e-10);
  }
}

TEST_CASE("elastic couplings shift the collective frequency by g_eff Q / (2 f_eff)") {
  for (double g : {0.5, 2.0, -1.5}) {
    auto res = self_consistent_solve(15.0, g, 6.0, 1.0, DetuningDistribution::delta0());
    CHECK(res.omega_bar == doctest::Approx(g * 7.0 / 30.0).epsilon(1e-9));
    CHECK(res.nontrivial);
  }
}

TEST_CASE("self-consistent solve reproduces the Lorentzian closed form") {
  for (double w : {4.0, 6.0, 8.0}) {
    for (double delta : {0.3, 1.0, 2.0}) {
      auto res =
          self_consistent_solve(15.0, 0.0, w, 1.0, DetuningDistribution::lorentzian(delta));
      CHECK(res.Z == doctest::Approx(z_lorentzian(15.0, w, 1.0, delta)).epsilon(1e-6));
    }
  }
}

TEST_CASE("Lorentzian optimum shifts toward f/2 - delta/sqrt(2)") {
  const double f = 40.0, delta = 2.0;
  double best_w = 0, best_z = -1;
  for (double w = 10.0; w <= 25.0; w += 0.01) {
    double z = z_lorentzian(f, w, 1.0, delta);
    if (z > best_z) {
      best_z = z;
      best_w = w;
    }
  }
  // the asymptotic optimum carries O(gamma) corrections at finite f
  CHECK(std::abs(best_w - (f / 2 - delta / std::sqrt(2.0))) < 0.1 * (f / 2));
}

TEST_CASE("order parameter: aligned bound and random-phase scaling") {
  BlochState s = BlochState::zero(4);
  for (int a = 0; a < 4; ++a) s.sx[a] = 0.5;
  CHECK(order_parameter(s).Z == doctest::Approx(0.5).epsilon(1e-14));

  // random phases: Z ~ N^{-1/2} scaling, averaged over draws
  for (int n : {256, 4096}) {
    double mean = 0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r)
      mean += order_parameter(BlochState::random_phases(n, 1000 + r, 0.0)).Z;
    mean /= reps;
    // E[Z] for random phases is sqrt(pi)/2 * 0.5 / sqrt(N)
    double expect = 0.5 * std::sqrt(M_PI) / 2.0 / std::sqrt(double(n));
    CHECK(mean == doctest::Approx(expect).epsilon(0.35));
  }
}

TEST_CASE("integration preserves the Bloch ball") {
  auto arr = DipoleArray::uniform(8);
  auto cm = mean_field_all_to_all(8, 15.0);
  MfOptions opt;
  opt.t_final = 40.0;
  opt.steady_tol = 0;
  for (int i = 1; i <= 40; ++i) opt.sample_times.push_back(i);
  auto series = integrate_mf(BlochState::random_phases(8, 5), cm, 6.5, arr, opt);
  for (const auto& st : series.states) CHECK(st.max_norm() <= 0.5 + 1e-7);
}

TEST_CASE("steady flag and stop reason") {
  auto arr = DipoleArray::uniform(4);
  auto cm = mean_field_all_to_all(4, 10.0);
  MfOptions opt;
  opt.t_final = 500.0;
  auto series = integrate_mf(BlochState::random_phases(4, 9), cm, 4.0, arr, opt);
  CHECK(series.steady);
  CHECK(series.stop == "steady");
}

TEST_CASE("detuning list loads from a file, one value per line") {
  auto path = std::filesystem::temp_directory_path() / "radsync_detunings.txt";
  {
    std::ofstream f(path);
    f << "0.25\n-0.5\n\n0.125\n";
  }
  auto d = DetuningDistribution::from_file(path);
  REQUIRE(d.values.size() == 3);
  CHECK(d.values[1] == -0.5);
  std::filesystem::remove(path);
}

TEST_CASE("series CSV carries the documented header") {
  auto arr = DipoleArray::uniform(2);
  auto cm = mean_field_all_to_all(2, 4.0);
  MfOptions opt;
  opt.t_final = 1.0;
  opt.steady_tol = 0;
  opt.sample_times = {0.5, 1.0};
  auto series = integrate_mf(BlochState::random_phases(2, 2), cm, 2.0, arr, opt);
  auto path = std::filesystem::temp_directory_path() / "radsync_series.csv";
  write_mf_series_csv(series, path);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "t,Z,Phi,mean_Sz");
  std::filesystem::remove(path);
}
