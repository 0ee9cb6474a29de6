#include <cmath>
#include <stdexcept>

#include "radsync/run.hpp"

namespace radsync {

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a * std::pow(b / a, double(i) / (n - 1));
  return v;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"sr87",   "organic_dye",   "fig2a", "fig2b", "fig2cd",
          "fig3_powerlaw", "figA1", "fig4a", "fig4b"};
}

RunConfig preset(const std::string& name) {
  RunConfig cfg;
  cfg.output.directory = "radsync_out/" + name;

  if (name == "fig2a") {
    // mean-field phase diagram over (W, f_eff)
    cfg.system.mode = "collective";
    cfg.system.n = 200;
    cfg.solver.engine = Engine::meanfield;
    cfg.sweep = {{"W", logspace(0.1, 40.0, 20)}, {"f_eff", linspace(1.0, 40.0, 20)}};
  } else if (name == "fig2b") {
    // spin-spin order parameter phase diagram, permutation-symmetric solution;
    // N = 40 keeps f_eff/N <= gamma over the whole grid (complete positivity)
    cfg.system.mode = "collective";
    cfg.system.n = 40;  // desk-scale stand-in for the large-array diagram
    cfg.solver.engine = Engine::symmetric;
    cfg.sweep = {{"W", logspace(0.1, 40.0, 16)}, {"f_eff", linspace(1.0, 40.0, 16)}};
  } else if (name == "fig2cd") {
    // conditional QFI along a repump sweep (diffusive unraveling)
    cfg.system.mode = "dicke";
    cfg.system.n = 10;
    cfg.system.f_eff = 15.0;
    cfg.solver.engine = Engine::qsd;
    cfg.solver.trajectories = 64;
    cfg.solver.t_burn = 4.0;
    cfg.solver.t_final = 6.0;
    cfg.solver.sample_dt = 0.25;
    cfg.sweep = {{"W", std::vector<double>{2.5, 5.0, 7.5, 10.0, 15.0}}};
  } else if (name == "fig3_powerlaw") {
    // cluster order parameters under power-law couplings at optimal repump
    cfg.system.mode = "powerlaw";
    cfg.system.dimension = 1;
    cfg.system.extent = 64;  // desk-scale stand-in for the 900-site arrays
    cfg.solver.engine = Engine::cumulant;
    cfg.solver.u1_reduction = true;
    cfg.solver.repump_policy = RepumpPolicy::optimal_scan;
    cfg.sweep = {{"alpha", std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0}}};
  } else if (name == "figA1") {
    // two-time decay rate against repump, symmetric engine vs cumulant
    cfg.system.mode = "collective";
    cfg.system.n = 70;
    cfg.system.f_eff = 15.0;
    cfg.solver.engine = Engine::symmetric;
    cfg.solver.two_time = true;
    cfg.sweep = {{"W", std::vector<double>{0.25, 0.5, 1.0, 2.5, 5.0, 7.5, 10.0, 15.0, 20.0}}};
  } else if (name == "fig4a") {
    // anisotropic chain, order parameter over (theta, spacing)
    cfg.system.mode = "lattice";
    cfg.system.dimension = 1;
    cfg.system.extent = 12;
    cfg.solver.engine = Engine::jump;
    cfg.solver.trajectories = 64;
    cfg.solver.t_burn = 10.0;
    cfg.solver.t_final = 40.0;
    cfg.solver.sample_dt = 0.5;
    cfg.solver.repump_policy = RepumpPolicy::half_feff;
    cfg.sweep = {{"theta", std::vector<double>{0.0, M_PI / 8, M_PI / 4, kMagicAngle, M_PI / 2}},
                 {"spacing_over_lambda", std::vector<double>{0.05, 0.08, 0.12}}};
  } else if (name == "fig4b") {
    // chain at the magic angle vs identically-coupled reference; heavy run
    cfg.system.mode = "lattice";
    cfg.system.dimension = 1;
    cfg.system.extent = 16;
    cfg.system.theta = kMagicAngle;
    cfg.system.spacing_over_lambda = 0.08;
    cfg.solver.engine = Engine::jump;
    cfg.solver.trajectories = 32;
    cfg.solver.t_burn = 10.0;
    cfg.solver.t_final = 30.0;
    cfg.solver.sample_dt = 0.5;
    cfg.sweep = {{"W", linspace(1.0, 12.0, 8)}};
  } else if (name == "sr87") {
    // strontium lattice numbers: gamma = 290e3 1/s, lambda = 2.6 um, a = 0.2 um
    cfg.system.mode = "lattice";
    cfg.system.dimension = 1;
    cfg.system.extent = 12;
    cfg.system.spacing_over_lambda = 0.2 / 2.6;
    cfg.system.theta = kMagicAngle;
    cfg.solver.engine = Engine::jump;
    cfg.solver.trajectories = 128;
    cfg.solver.t_burn = 10.0;
    cfg.solver.t_final = 40.0;
    cfg.solver.repump_policy = RepumpPolicy::half_feff;
    cfg.metadata_json =
        R"({"gamma_si_per_s": 290000.0, "lambda_um": 2.6, "spacing_um": 0.2, "platform": "87Sr 3P0-3D1 in a magic-wavelength lattice"})";
  } else if (name == "organic_dye") {
    // dye-aggregate numbers: a/lambda ~ 1e-3, gamma ~ 0.1-1 GHz, W ~ gamma
    cfg.system.mode = "lattice";
    cfg.system.dimension = 1;
    cfg.system.extent = 8;
    cfg.system.spacing_over_lambda = 1e-3;
    cfg.system.theta = kMagicAngle;
    cfg.system.repump = 1.0;
    cfg.solver.engine = Engine::exact;
    cfg.metadata_json =
        R"({"gamma_si_per_s_range": [1e8, 1e9], "spacing_over_lambda_order": 1e-3, "pump_intensity_kw_cm2": [1.0, 10.0], "platform": "organic chromophore aggregates"})";
  } else {
    throw std::invalid_argument("preset: unknown name \"" + name + "\"");
  }
  cfg.validate();
  return cfg;
}

}  // namespace radsync
