#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace radsync {

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h0 = 0.0;            // 0 => automatic initial step
  double hmax = 0.0;          // 0 => span
  std::uint64_t max_steps = 200'000'000;
  double steady_tol = 0.0;    // >0 => stop when ||dy/dt||_inf < steady_tol
};

struct OdeStatus {
  double t_end = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t rejected = 0;
  bool steady = false;        // stopped on the derivative-norm criterion
  std::string stop;           // "t_final", "steady"
};

struct OdeStepUnderflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adaptive embedded Dormand-Prince 5(4) pair with FSAL and PI step control.
/// rhs(t, y, dydt); observer (optional) is called at t0 and at each requested
/// sample time, which the integrator hits exactly by clamping the step.
template <class Rhs>
OdeStatus integrate_dopri5(
    Rhs&& rhs, Eigen::VectorXd& y, double t0, double t1, const OdeOptions& opt,
    std::span<const double> sample_times = {},
    const std::function<void(double, const Eigen::VectorXd&)>& observer = {}) {
  // Butcher tableau (Dormand & Prince 1980)
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const Eigen::Index n = y.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), yerr(n);

  double t = t0;
  const double span = t1 - t0;
  if (span <= 0) throw std::invalid_argument("integrate_dopri5: t1 <= t0");
  const double hmax = opt.hmax > 0 ? opt.hmax : span;

  rhs(t, y, k1);
  std::size_t next_sample = 0;
  const bool t0_requested =
      sample_times.empty() || sample_times.front() <= t0 + 1e-300;
  while (next_sample < sample_times.size() && sample_times[next_sample] <= t0 + 1e-300)
    ++next_sample;
  if (observer && t0_requested) observer(t, y);

  auto err_norm = [&](const Eigen::VectorXd& e, const Eigen::VectorXd& ya,
                      const Eigen::VectorXd& yb) {
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double sc = opt.atol + opt.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      double q = e[i] / sc;
      s += q * q;
    }
    return std::sqrt(s / static_cast<double>(n));
  };

  double h = opt.h0;
  if (h <= 0) {
    double d0 = y.cwiseAbs().maxCoeff() + opt.atol;
    double d1 = k1.cwiseAbs().maxCoeff() + opt.atol / span;
    h = std::clamp(0.01 * d0 / d1, span * 1e-10, hmax);
  }
  h = std::min(h, hmax);

  OdeStatus st;
  double err_prev = 1.0;
  const double hmin_abs = span * 1e-14;

  while (t < t1) {
    double t_target = t1;
    if (next_sample < sample_times.size())
      t_target = std::min(t_target, sample_times[next_sample]);
    bool clipped = t + h >= t_target;
    double hs = clipped ? (t_target - t) : h;
    if (hs < hmin_abs && !clipped)
      throw OdeStepUnderflow("integrate_dopri5: step size underflow at t=" + std::to_string(t) +
                             " h=" + std::to_string(hs));

    ytmp = y + hs * (a21 * k1);
    rhs(t + c2 * hs, ytmp, k2);
    ytmp = y + hs * (a31 * k1 + a32 * k2);
    rhs(t + c3 * hs, ytmp, k3);
    ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * hs, ytmp, k4);
    ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * hs, ytmp, k5);
    ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + hs, ytmp, k6);
    ytmp = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + hs, ytmp, k7);  // FSAL
    yerr = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = err_norm(yerr, y, ytmp);
    if (err <= 1.0) {
      t += hs;
      y.swap(ytmp);
      k1.swap(k7);
      ++st.steps;
      if (next_sample < sample_times.size() &&
          t >= sample_times[next_sample] - 1e-12 * span) {
        if (observer) observer(t, y);
        ++next_sample;
      }
      if (opt.steady_tol > 0 && k1.cwiseAbs().maxCoeff() < opt.steady_tol) {
        st.steady = true;
        st.stop = "steady";
        st.t_end = t;
        return st;
      }
      // PI controller (Gustafsson)
      double fac = 0.9 * std::pow(err > 1e-300 ? err : 1e-300, -0.7 / 5.0) *
                   std::pow(err_prev, 0.4 / 5.0);
      err_prev = std::max(err, 1e-300);
      h = std::min(hmax, (clipped ? h : hs) * std::clamp(fac, 0.2, 5.0));
    } else {
      ++st.rejected;
      double fac = std::max(0.2, 0.9 * std::pow(err, -1.0 / 5.0));
      h = hs * fac;
      if (h < hmin_abs)
        throw OdeStepUnderflow("integrate_dopri5: repeated rejection, h underflow at t=" +
                               std::to_string(t));
    }
    if (st.steps + st.rejected > opt.max_steps)
      throw std::runtime_error("integrate_dopri5: max step count exceeded");
  }
  st.t_end = t;
  st.stop = "t_final";
  return st;
}

}  // namespace radsync
