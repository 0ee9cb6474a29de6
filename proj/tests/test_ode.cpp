#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "radsync/ode.hpp"

using namespace radsync;

TEST_CASE("dopri5 reproduces exponential decay to tolerance") {
  Eigen::VectorXd y(1);
  y[0] = 1.0;
  auto rhs = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& d) { d = -2.0 * x; };
  OdeOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-14;
  auto st = integrate_dopri5(rhs, y, 0.0, 3.0, opt);
  CHECK(st.stop == "t_final");
  CHECK(y[0] == doctest::Approx(std::exp(-6.0)).epsilon(1e-9));
}

TEST_CASE("dopri5 hits sample times exactly and in order") {
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  // harmonic oscillator
  auto rhs = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& d) {
    d.resize(2);
    d[0] = x[1];
    d[1] = -x[0];
  };
  std::vector<double> samples{0.5, 1.0, 2.0, 3.1};
  std::vector<double> seen;
  std::vector<double> vals;
  OdeOptions opt;
  opt.rtol = 1e-11;
  opt.atol = 1e-13;
  integrate_dopri5(rhs, y, 0.0, 4.0, opt, samples,
                   [&](double t, const Eigen::VectorXd& x) {
                     seen.push_back(t);
                     vals.push_back(x[0]);
                   });
  REQUIRE(seen.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(seen[i] == doctest::Approx(samples[i]).epsilon(1e-12));
    CHECK(vals[i] == doctest::Approx(std::cos(samples[i])).epsilon(1e-9));
  }
}

TEST_CASE("dopri5 steady-state detection stops early") {
  Eigen::VectorXd y(1);
  y[0] = 1.0;
  auto rhs = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& d) { d = -x; };
  OdeOptions opt;
  opt.steady_tol = 1e-8;
  auto st = integrate_dopri5(rhs, y, 0.0, 1e4, opt);
  CHECK(st.steady);
  CHECK(st.stop == "steady");
  CHECK(st.t_end < 30.0);
  CHECK(std::abs(y[0]) < 1e-7);
}

TEST_CASE("dopri5 handles moderately stiff linear rates") {
  Eigen::VectorXd y(2);
  y << 1.0, 1.0;
  auto rhs = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& d) {
    d.resize(2);
    d[0] = -1000.0 * x[0];
    d[1] = -0.5 * x[1];
  };
  OdeOptions opt;
  opt.rtol = 1e-9;
  opt.atol = 1e-12;
  integrate_dopri5(rhs, y, 0.0, 2.0, opt);
  CHECK(y[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
  CHECK(std::abs(y[0]) < 1e-12);
}

TEST_CASE("dopri5 throws on step underflow") {
  Eigen::VectorXd y(1);
  y[0] = 1.0;
  // finite-time blow-up forces endless rejection near t* ~ 1
  auto rhs = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& d) {
    d = x.array().square().matrix();
  };
  OdeOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  CHECK_THROWS_AS(integrate_dopri5(rhs, y, 0.0, 2.0, opt), OdeStepUnderflow);
}
