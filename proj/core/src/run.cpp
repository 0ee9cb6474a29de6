#include "radsync/run.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "radsync/collective.hpp"
#include "radsync/cumulant.hpp"
#include "radsync/observables.hpp"
#include "radsync/trajectories.hpp"
#include "radsync/util.hpp"
#include "radsync/version.hpp"

namespace radsync {

using json = nlohmann::json;
using cd = std::complex<double>;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
  }
}

Engine engine_from_string(const std::string& s) {
  if (s == "meanfield") return Engine::meanfield;
  if (s == "exact") return Engine::exact;
  if (s == "symmetric") return Engine::symmetric;
  if (s == "cumulant") return Engine::cumulant;
  if (s == "jump") return Engine::jump;
  if (s == "qsd") return Engine::qsd;
  throw std::invalid_argument("config: unknown engine \"" + s + "\"");
}

std::string engine_to_string(Engine e) {
  switch (e) {
    case Engine::meanfield: return "meanfield";
    case Engine::exact: return "exact";
    case Engine::symmetric: return "symmetric";
    case Engine::cumulant: return "cumulant";
    case Engine::jump: return "jump";
    case Engine::qsd: return "qsd";
  }
  return "?";
}

RepumpPolicy policy_from_string(const std::string& s) {
  if (s == "fixed") return RepumpPolicy::fixed;
  if (s == "half_feff") return RepumpPolicy::half_feff;
  if (s == "optimal_scan") return RepumpPolicy::optimal_scan;
  throw std::invalid_argument("config: unknown repump_policy \"" + s + "\"");
}

std::string policy_to_string(RepumpPolicy p) {
  switch (p) {
    case RepumpPolicy::fixed: return "fixed";
    case RepumpPolicy::half_feff: return "half_feff";
    case RepumpPolicy::optimal_scan: return "optimal_scan";
  }
  return "?";
}

}  // namespace

void RunConfig::validate() const {
  if (version != 1) throw std::invalid_argument("config: unsupported version");
  const auto& s = system;
  if (s.mode != "lattice" && s.mode != "collective" && s.mode != "dicke" && s.mode != "powerlaw")
    throw std::invalid_argument("config: system.mode must be lattice|collective|dicke|powerlaw");
  if (s.gamma <= 0) throw std::invalid_argument("config: system.gamma must be > 0");
  if (s.repump < 0) throw std::invalid_argument("config: system.repump must be >= 0");
  if (s.f_eff < 0) throw std::invalid_argument("config: system.f_eff must be >= 0");
  if (s.spacing_over_lambda <= 0)
    throw std::invalid_argument("config: system.spacing_over_lambda must be > 0");
  if (s.detuning.width < 0) throw std::invalid_argument("config: detuning width must be >= 0");
  if (s.mode == "lattice" || s.mode == "powerlaw") {
    if (s.extent < 1) throw std::invalid_argument("config: system.extent must be >= 1");
    if (s.dimension != 1 && s.dimension != 2)
      throw std::invalid_argument("config: system.dimension must be 1 or 2");
  } else if (s.n < 1) {
    throw std::invalid_argument("config: system.n must be >= 1");
  }

  if (solver.engine == Engine::symmetric) {
    if (s.mode != "collective" && s.mode != "dicke")
      throw std::invalid_argument(
          "config: the symmetric engine requires collective or dicke mode");
    if (s.detuning.kind != "none")
      throw std::invalid_argument("config: the symmetric engine requires zero detunings");
  }
  if (solver.rtol <= 0 || solver.atol <= 0)
    throw std::invalid_argument("config: solver tolerances must be > 0");
  if (solver.trajectories < 1) throw std::invalid_argument("config: trajectories must be >= 1");
  if (solver.repump_policy == RepumpPolicy::optimal_scan &&
      (solver.engine == Engine::jump || solver.engine == Engine::qsd ||
       solver.engine == Engine::exact))
    throw std::invalid_argument(
        "config: repump_policy optimal_scan supports meanfield/symmetric/cumulant engines");

  if (sweep.size() > 2) throw std::invalid_argument("config: at most two sweep axes");
  for (const auto& ax : sweep) {
    static const char* names[] = {"W", "f_eff", "alpha", "theta", "spacing_over_lambda", "Delta"};
    if (std::find_if(std::begin(names), std::end(names),
                     [&](const char* n) { return ax.name == n; }) == std::end(names))
      throw std::invalid_argument("config: unknown sweep axis \"" + ax.name + "\"");
    if (ax.values.empty()) throw std::invalid_argument("config: sweep axis has no values");
    if ((ax.name == "W" || ax.name == "f_eff" || ax.name == "Delta" ||
         ax.name == "spacing_over_lambda"))
      for (double v : ax.values)
        if (v < 0 || (ax.name == "spacing_over_lambda" && v <= 0))
          throw std::invalid_argument("config: sweep axis \"" + ax.name +
                                      "\" requires nonnegative values");
  }
}

namespace {

std::vector<double> axis_values_from_json(const json& ja) {
  std::vector<double> values;
  if (ja.contains("values")) {
    values = ja.at("values").get<std::vector<double>>();
  } else {
    double from = ja.at("from").get<double>();
    double to = ja.at("to").get<double>();
    int count = ja.at("count").get<int>();
    std::string scale = ja.value("scale", "linear");
    if (count < 1) throw std::invalid_argument("config: sweep count must be >= 1");
    for (int i = 0; i < count; ++i) {
      double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      if (scale == "log") {
        if (from <= 0 || to <= 0) throw std::invalid_argument("config: log axis needs > 0 ends");
        values.push_back(from * std::pow(to / from, f));
      } else if (scale == "linear") {
        values.push_back(from + (to - from) * f);
      } else {
        throw std::invalid_argument("config: axis scale must be linear|log");
      }
    }
  }
  return values;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j = json::parse(text);
  check_keys(j, {"version", "system", "solver", "sweep", "output", "metadata"}, "the top level");
  RunConfig cfg;
  cfg.version = j.value("version", 1);

  if (j.contains("system")) {
    const json& js = j.at("system");
    check_keys(js,
               {"mode", "n", "dimension", "extent", "spacing_over_lambda", "theta", "f_eff",
                "alpha", "prefactor", "repump", "gamma", "detuning", "seed"},
               "system");
    auto& s = cfg.system;
    s.mode = js.value("mode", s.mode);
    s.n = js.value("n", s.n);
    s.dimension = js.value("dimension", s.dimension);
    s.extent = js.value("extent", s.extent);
    s.spacing_over_lambda = js.value("spacing_over_lambda", s.spacing_over_lambda);
    s.theta = js.value("theta", s.theta);
    s.f_eff = js.value("f_eff", s.f_eff);
    s.alpha = js.value("alpha", s.alpha);
    s.prefactor = js.value("prefactor", s.prefactor);
    s.repump = js.value("repump", s.repump);
    s.gamma = js.value("gamma", s.gamma);
    s.seed = js.value("seed", s.seed);
    if (js.contains("detuning")) {
      const json& jd = js.at("detuning");
      check_keys(jd, {"kind", "width", "values", "path"}, "system.detuning");
      s.detuning.kind = jd.value("kind", "none");
      s.detuning.width = jd.value("width", 0.0);
      if (jd.contains("values")) s.detuning.values = jd.at("values").get<std::vector<double>>();
      s.detuning.path = jd.value("path", "");
      if (s.detuning.kind == "file") {
        s.detuning.values = DetuningDistribution::from_file(s.detuning.path).values;
        s.detuning.kind = "list";
      }
      if (s.detuning.kind != "none" && s.detuning.kind != "lorentzian" &&
          s.detuning.kind != "uniform" && s.detuning.kind != "list")
        throw std::invalid_argument("config: detuning.kind must be none|lorentzian|uniform|list|file");
    }
  }

  if (j.contains("solver")) {
    const json& js = j.at("solver");
    check_keys(js,
               {"engine", "rtol", "atol", "t_final", "trajectories", "dt", "t_burn", "sample_dt",
                "u1_reduction", "two_time", "repump_policy"},
               "solver");
    auto& s = cfg.solver;
    s.engine = engine_from_string(js.value("engine", "meanfield"));
    s.rtol = js.value("rtol", s.rtol);
    s.atol = js.value("atol", s.atol);
    s.t_final = js.value("t_final", s.t_final);
    s.trajectories = js.value("trajectories", s.trajectories);
    s.dt = js.value("dt", s.dt);
    s.t_burn = js.value("t_burn", s.t_burn);
    s.sample_dt = js.value("sample_dt", s.sample_dt);
    s.u1_reduction = js.value("u1_reduction", s.u1_reduction);
    s.two_time = js.value("two_time", s.two_time);
    s.repump_policy = policy_from_string(js.value("repump_policy", "fixed"));
  }

  if (j.contains("sweep")) {
    const json& js = j.at("sweep");
    check_keys(js, {"axes"}, "sweep");
    for (const json& ja : js.value("axes", json::array())) {
      check_keys(ja, {"name", "values", "from", "to", "count", "scale"}, "sweep axis");
      SweepAxis ax;
      ax.name = ja.at("name").get<std::string>();
      ax.values = axis_values_from_json(ja);
      cfg.sweep.push_back(std::move(ax));
    }
  }

  if (j.contains("output")) {
    const json& js = j.at("output");
    check_keys(js, {"directory", "formats", "per_trajectory"}, "output");
    cfg.output.directory = js.value("directory", cfg.output.directory);
    if (js.contains("formats")) {
      cfg.output.csv = false;
      cfg.output.json = false;
      for (const auto& f : js.at("formats")) {
        if (f == "csv") cfg.output.csv = true;
        else if (f == "json") cfg.output.json = true;
        else throw std::invalid_argument("config: output format must be csv|json");
      }
    }
    cfg.output.per_trajectory = js.value("per_trajectory", false);
  }

  if (j.contains("metadata")) cfg.metadata_json = j.at("metadata").dump();

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  json js;
  const auto& s = cfg.system;
  js["mode"] = s.mode;
  js["n"] = s.n;
  js["dimension"] = s.dimension;
  js["extent"] = s.extent;
  js["spacing_over_lambda"] = s.spacing_over_lambda;
  js["theta"] = s.theta;
  js["f_eff"] = s.f_eff;
  js["alpha"] = s.alpha;
  js["prefactor"] = s.prefactor;
  js["repump"] = s.repump;
  js["gamma"] = s.gamma;
  js["seed"] = s.seed;
  json jd;
  jd["kind"] = s.detuning.kind;
  jd["width"] = s.detuning.width;
  jd["values"] = s.detuning.values;
  jd["path"] = s.detuning.path;
  js["detuning"] = jd;
  j["system"] = js;
  json jo;
  jo["engine"] = engine_to_string(cfg.solver.engine);
  jo["rtol"] = cfg.solver.rtol;
  jo["atol"] = cfg.solver.atol;
  jo["t_final"] = cfg.solver.t_final;
  jo["trajectories"] = cfg.solver.trajectories;
  jo["dt"] = cfg.solver.dt;
  jo["t_burn"] = cfg.solver.t_burn;
  jo["sample_dt"] = cfg.solver.sample_dt;
  jo["u1_reduction"] = cfg.solver.u1_reduction;
  jo["two_time"] = cfg.solver.two_time;
  jo["repump_policy"] = policy_to_string(cfg.solver.repump_policy);
  j["solver"] = jo;
  json jsw = json::array();
  for (const auto& ax : cfg.sweep) {
    json ja;
    ja["name"] = ax.name;
    ja["values"] = ax.values;
    jsw.push_back(ja);
  }
  j["sweep"]["axes"] = jsw;
  json jout;
  jout["directory"] = cfg.output.directory;
  json fmts = json::array();
  if (cfg.output.csv) fmts.push_back("csv");
  if (cfg.output.json) fmts.push_back("json");
  jout["formats"] = fmts;
  jout["per_trajectory"] = cfg.output.per_trajectory;
  j["output"] = jout;
  if (!cfg.metadata_json.empty()) j["metadata"] = json::parse(cfg.metadata_json);
  return j.dump(2);
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(serialize_config(cfg)); }

// ---------------------------------------------------------------------------
// point execution
// ---------------------------------------------------------------------------

namespace {

std::vector<double> sample_detunings(const DetuningSpec& spec, int n, std::mt19937_64& rng) {
  std::vector<double> out(n, 0.0);
  if (spec.kind == "none") return out;
  if (spec.kind == "list") {
    if (static_cast<int>(spec.values.size()) == 1) {
      std::fill(out.begin(), out.end(), spec.values[0]);
    } else if (static_cast<int>(spec.values.size()) == n) {
      out = spec.values;
    } else {
      throw std::invalid_argument("detuning list length mismatch");
    }
    return out;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    if (spec.kind == "lorentzian")
      out[i] = spec.width * std::tan(M_PI * (u(rng) - 0.5));
    else
      out[i] = spec.width * (2.0 * u(rng) - 1.0);
  }
  return out;
}

struct BuiltSystem {
  DipoleArray array;
  CouplingMatrices couplings;
};

BuiltSystem build_system(const SystemBlock& s, Engine engine, std::mt19937_64& rng) {
  BuiltSystem bs;
  if (s.mode == "lattice" || s.mode == "powerlaw") {
    const int n = s.dimension == 1 ? s.extent : s.extent * s.extent;
    auto detunings = sample_detunings(s.detuning, n, rng);
    Eigen::Vector3d orient(std::cos(s.theta), 0.0, std::sin(s.theta));
    bs.array = build_lattice({s.dimension, s.extent}, s.spacing_over_lambda, orient, detunings);
    bs.array.gamma = s.gamma;
    CouplingSpec cs;
    cs.mode = s.mode == "lattice" ? CouplingMode::dipolar : CouplingMode::powerlaw;
    cs.alpha = s.alpha;
    cs.prefactor = s.prefactor;
    bs.couplings = coupling_matrices(bs.array, cs);
  } else {
    bs.array = DipoleArray::uniform(s.n, s.gamma);
    bs.array.detunings = sample_detunings(s.detuning, s.n, rng);
    if (s.mode == "dicke") {
      bs.couplings = dicke_couplings(s.n, s.f_eff);
    } else if (engine == Engine::meanfield) {
      // all-to-all with the per-site coupling sum equal to f_eff, so the
      // finite-N fixed point matches the closed forms
      bs.couplings = mean_field_all_to_all(s.n, s.f_eff, s.gamma);
    } else {
      bs.couplings = collective_couplings(s.n, s.f_eff, s.gamma);
    }
  }
  return bs;
}

struct Row {
  std::vector<std::pair<std::string, double>> kv;
  void set(const std::string& k, double v) { kv.emplace_back(k, v); }
};

double golden_max(const std::function<double(double)>& fn, double lo, double hi, double tol) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int it = 0; it < 60 && (b - a) > tol; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = fn(d);
    }
  }
  return 0.5 * (a + b);
}

template <class SeriesFn>
TwoTimeFit adaptive_two_time_fit(SeriesFn&& series_fn, double rate_scale,
                                 double resolution_target = 0.0) {
  double span = 12.0 / rate_scale;
  TwoTimeFit fit;
  for (int iter = 0; iter < 10; ++iter) {
    if (resolution_target > 0) span = std::max(span, 2 * M_PI / resolution_target);
    const int nsamp = 240;
    std::vector<double> grid(nsamp);
    for (int i = 0; i < nsamp; ++i) grid[i] = span * i / (nsamp - 1);
    auto series = series_fn(std::span<const double>(grid));
    TwoTimeFitOptions fo;
    if (resolution_target > 0) fo.zero_threshold = resolution_target;
    fit = fit_two_time(grid, series, fo);
    const bool need_longer = fit.gamma > 1e-12 && span < 3.0 / fit.gamma;
    if (!need_longer || span >= 4000.0) break;
    span = std::min(4000.0, std::max(span * 2.0, 3.5 / std::max(fit.gamma, 1e-6)));
  }
  return fit;
}

double resolve_repump(const SolverBlock& solver, const SystemBlock& sys,
                      const BuiltSystem& bs, const std::function<double(double)>& zq_of_w) {
  switch (solver.repump_policy) {
    case RepumpPolicy::fixed:
      return sys.repump;
    case RepumpPolicy::half_feff:
      return 0.5 * bs.couplings.f_eff;
    case RepumpPolicy::optimal_scan: {
      const double lo = 0.2 * sys.gamma;
      const double hi = std::max(2.0 * sys.gamma, 1.5 * bs.couplings.f_eff);
      return golden_max(zq_of_w, lo, hi, 0.02 * (hi - lo));
    }
  }
  return sys.repump;
}

void run_meanfield_point(const SystemBlock& sys, const SolverBlock& solver,
                         const BuiltSystem& bs, std::uint64_t seed, Row& row) {
  const int n = bs.array.size();
  auto zq_of_w = [&](double w) {
    MfOptions mo;
    mo.rtol = solver.rtol;
    mo.atol = solver.atol;
    mo.t_final = solver.t_final;
    auto series = integrate_mf(BlochState::random_phases(n, seed), bs.couplings, w, bs.array, mo);
    return order_parameter(series.states.back()).Z;
  };
  const double W = resolve_repump(solver, sys, bs, zq_of_w);

  MfOptions mo;
  mo.rtol = solver.rtol;
  mo.atol = solver.atol;
  mo.t_final = solver.t_final;
  double t_final = mo.t_final > 0 ? mo.t_final
                                  : 50.0 * std::max(1.0 / sys.gamma, W > 0 ? 1.0 / W : 0.0);
  mo.sample_times.clear();
  for (int i = 1; i <= 64; ++i) mo.sample_times.push_back(t_final * i / 64.0);
  auto series = integrate_mf(BlochState::random_phases(n, seed), bs.couplings, W, bs.array, mo);
  OrderParameter op = order_parameter_series(series);
  row.set("Z", op.Z);
  row.set("Phi", op.Phi);
  row.set("omega_bar", op.omega_bar);
  row.set("mean_sz", series.states.back().sz.mean());
  row.set("steady", series.steady ? 1.0 : 0.0);
  row.set("w_used", W);
}

void run_exact_point(const SystemBlock& sys, const SolverBlock& solver, const BuiltSystem& bs,
                     Row& row) {
  Liouvillian liouv(bs.array, bs.couplings, sys.repump);
  SteadyStateOptions so;
  so.rtol = std::min(solver.rtol, 1e-9);
  so.atol = solver.atol;
  if (solver.t_final > 0) so.t_max = solver.t_final;
  auto ss = steady_state(liouv, so);
  auto z = zq_of_density(ss.rho);
  row.set("zq", z.zq);
  row.set("pair_re", z.raw_re);
  row.set("mean_sz", mean_sz(ss.rho));
  row.set("w_used", sys.repump);
  row.set("f_eff_system", bs.couplings.f_eff);
  if (solver.two_time) {
    const int n = bs.array.size();
    const int a = central_site(bs.array), b = (a + 1) % n;
    auto fit = adaptive_two_time_fit(
        [&](std::span<const double> grid) { return two_time_exact(ss.rho, liouv, a, b, grid); },
        sys.gamma + sys.repump);
    row.set("gamma_fit", fit.gamma);
    row.set("nu_fit", fit.nu);
  }
}

void run_symmetric_point(const SystemBlock& sys, const SolverBlock& solver, const BuiltSystem& bs,
                         Row& row) {
  const int n = bs.array.size();
  const double gamma_eff = sys.mode == "dicke" ? bs.couplings.f(0, 0) : sys.gamma;
  auto zq_of_w = [&](double w) {
    SymmetricGenerator gen(n, sys.f_eff, w, gamma_eff);
    return gen.zq(steady_symmetric(gen).d);
  };
  const double W = resolve_repump(solver, sys, bs, zq_of_w);
  SymmetricGenerator gen(n, sys.f_eff, W, gamma_eff);
  SteadyStateOptions so;
  so.rtol = std::min(solver.rtol, 1e-9);
  so.atol = solver.atol;
  if (solver.t_final > 0) so.t_max = solver.t_final;
  auto ss = steady_symmetric(gen, so);
  double pair = gen.pair_pm(ss.d);
  row.set("zq", pair > 0 ? std::sqrt(pair) : 0.0);
  row.set("pair_re", pair);
  row.set("mean_sz", gen.expect_sz(ss.d));
  row.set("w_used", W);
  auto ps = gen.reduced_pair_state(ss.d);
  row.set("pair_uu", ps(0, 0).real());
  row.set("pair_dd", ps(3, 3).real());
  row.set("pair_cross_re", ps(1, 2).real());
  if (solver.two_time) {
    auto fit = adaptive_two_time_fit(
        [&](std::span<const double> grid) { return two_time_symmetric(gen, ss.d, grid); },
        sys.gamma + W);
    row.set("gamma_fit", fit.gamma);
    row.set("nu_fit", fit.nu);
  }
}

void run_cumulant_point(const SystemBlock& sys, const SolverBlock& solver, const BuiltSystem& bs,
                        Row& row) {
  const int n = bs.array.size();
  CumulantOptions co;
  co.rtol = solver.rtol;
  co.atol = solver.atol;
  co.u1_reduction = solver.u1_reduction;
  if (solver.t_final > 0) co.t_max = solver.t_final;
  auto zq_of_w = [&](double w) {
    return zq_all(steady_cumulant(bs.couplings, w, bs.array, co).state).zq;
  };
  const double W = resolve_repump(solver, sys, bs, zq_of_w);
  auto ss = steady_cumulant(bs.couplings, W, bs.array, co);
  auto z = zq_all(ss.state);
  row.set("zq", z.zq);
  row.set("pair_re", z.raw_re);
  row.set("imag_residual", z.imag_residual);
  row.set("mean_sz", ss.state.s.mean());
  row.set("w_used", W);
  // cluster order parameters on chains long enough for the d = 32 window
  if ((sys.mode == "lattice" || sys.mode == "powerlaw") && sys.dimension == 1 &&
      central_site(bs.array) + 32 <= n) {
    for (int d : {2, 4, 8, 16, 32})
      row.set("zq_d" + std::to_string(d), zq_cluster(ss.state, d, bs.array).zq);
  }
  if (solver.two_time) {
    const int a = central_site(bs.array);
    const bool detuned = sys.detuning.kind != "none";
    if (detuned) {
      // entrainment analysis against the central dipole
      std::vector<int> partners;
      for (int b = 0; b < n; ++b)
        if (b != a) partners.push_back(b);
      std::vector<TwoTimeFit> fits(partners.size());
      const double res_target = 0.01 * sys.gamma;
      for (std::size_t i = 0; i < partners.size(); ++i) {
        const int b = partners[i];
        fits[i] = adaptive_two_time_fit(
            [&](std::span<const double> grid) {
              return two_time_cumulant(ss.state, bs.couplings, bs.array, W, a, b, grid);
            },
            sys.gamma + W, res_target);
      }
      auto hist = frequency_histogram(fits);
      row.set("entrained_fraction", hist.entrained_fraction);
    } else {
      const int b = (a + 1) % n;
      auto fit = adaptive_two_time_fit(
          [&](std::span<const double> grid) {
            return two_time_cumulant(ss.state, bs.couplings, bs.array, W, a, b, grid);
          },
          sys.gamma + W);
      row.set("gamma_fit", fit.gamma);
      row.set("nu_fit", fit.nu);
    }
  }
}

void run_jump_point(const SystemBlock& sys, const SolverBlock& solver, const BuiltSystem& bs,
                    std::uint64_t seed, unsigned workers, Row& row) {
  const double W = solver.repump_policy == RepumpPolicy::half_feff ? 0.5 * bs.couplings.f_eff
                                                                   : sys.repump;
  JumpOptions jo;
  jo.trajectories = solver.trajectories;
  jo.t_burn = solver.t_burn;
  jo.t_end = solver.t_final > 0 ? solver.t_final : solver.t_burn + 20.0;
  jo.sample_dt = solver.sample_dt;
  jo.seed = seed;
  jo.workers = workers;
  auto records = run_jump_ensemble(bs.array, bs.couplings, W, jo);
  std::vector<double> pr, sz;
  for (const auto& r : records) {
    pr.push_back(r.pair_pm.real());
    sz.push_back(r.mean_sz);
  }
  auto pm = reduce_mean_se(pr);
  auto sm = reduce_mean_se(sz);
  row.set("zq", pm.mean > 0 ? std::sqrt(pm.mean) : 0.0);
  row.set("pair_re", pm.mean);
  row.set("pair_se", pm.se);
  row.set("mean_sz", sm.mean);
  row.set("w_used", W);
  row.set("f_eff_system", bs.couplings.f_eff);
}

void run_qsd_point(const SystemBlock& sys, const SolverBlock& solver, const BuiltSystem& bs,
                   std::uint64_t seed, unsigned workers, Row& row) {
  const double W = solver.repump_policy == RepumpPolicy::half_feff ? 0.5 * bs.couplings.f_eff
                                                                   : sys.repump;
  QsdOptions qo;
  qo.trajectories = solver.trajectories;
  qo.dt = solver.dt;
  qo.t_burn = solver.t_burn;
  qo.t_end = solver.t_final > 0 ? solver.t_final : solver.t_burn + 2.0;
  qo.sample_dt = solver.sample_dt;
  qo.seed = seed;
  qo.workers = workers;
  qo.collect_fq = true;
  auto res = run_qsd_ensemble(bs.array, bs.couplings, W, qo);
  std::vector<double> fq, pr, sz;
  for (const auto& r : res.records) {
    fq.push_back(r.fq);
    pr.push_back(r.pair_pm.real());
    sz.push_back(r.mean_sz);
  }
  auto fm = reduce_mean_se(fq);
  auto pm = reduce_mean_se(pr);
  auto sm = reduce_mean_se(sz);
  row.set("fq_mean", fm.mean);
  row.set("fq_se", fm.se);
  row.set("zq", pm.mean > 0 ? std::sqrt(pm.mean) : 0.0);
  row.set("pair_re", pm.mean);
  row.set("mean_sz", sm.mean);
  row.set("w_used", W);
  row.set("dt_used", res.dt_used);
}

SystemBlock apply_axes(const SystemBlock& base, const std::vector<SweepAxis>& axes,
                       const std::vector<double>& vals) {
  SystemBlock s = base;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const std::string& n = axes[i].name;
    const double v = vals[i];
    if (n == "W") s.repump = v;
    else if (n == "f_eff") s.f_eff = v;
    else if (n == "alpha") s.alpha = v;
    else if (n == "theta") s.theta = v;
    else if (n == "spacing_over_lambda") s.spacing_over_lambda = v;
    else if (n == "Delta") {
      s.detuning.kind = "lorentzian";
      s.detuning.width = v;
    }
  }
  return s;
}

Row execute_point(const RunConfig& cfg, const SystemBlock& sys, std::uint64_t point_seed,
                  unsigned engine_workers) {
  std::mt19937_64 rng(point_seed);
  BuiltSystem bs = build_system(sys, cfg.solver.engine, rng);
  Row row;
  switch (cfg.solver.engine) {
    case Engine::meanfield:
      run_meanfield_point(sys, cfg.solver, bs, point_seed, row);
      break;
    case Engine::exact:
      run_exact_point(sys, cfg.solver, bs, row);
      break;
    case Engine::symmetric:
      run_symmetric_point(sys, cfg.solver, bs, row);
      break;
    case Engine::cumulant:
      run_cumulant_point(sys, cfg.solver, bs, row);
      break;
    case Engine::jump:
      run_jump_point(sys, cfg.solver, bs, point_seed, engine_workers, row);
      break;
    case Engine::qsd:
      run_qsd_point(sys, cfg.solver, bs, point_seed, engine_workers, row);
      break;
  }
  return row;
}

}  // namespace

std::string RunRecord::table_csv() const {
  std::string out = "point";
  for (const auto& a : axis_names) out += "," + a;
  for (const auto& c : columns) out += "," + c;
  out += ",status\n";
  for (const auto& p : points) {
    out += std::to_string(p.index);
    for (double v : p.axis_values) out += "," + format_g17(v);
    for (std::size_t i = 0; i < columns.size(); ++i)
      out += "," + (i < p.observables.size() ? format_g17(p.observables[i]) : std::string());
    out += std::string(",") + (p.ok ? "ok" : p.status) + "\n";
  }
  return out;
}

RunRecord run(const RunConfig& cfg_in, const RunOptions& opt) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  if (opt.seed_override) cfg.system.seed = *opt.seed_override;
  if (opt.output_override) cfg.output.directory = *opt.output_override;

  const auto t0 = std::chrono::steady_clock::now();

  // cartesian sweep grid, row-major in axis order
  std::vector<std::vector<double>> grid;
  if (cfg.sweep.empty()) {
    grid.push_back({});
  } else if (cfg.sweep.size() == 1) {
    for (double v : cfg.sweep[0].values) grid.push_back({v});
  } else {
    for (double v0 : cfg.sweep[0].values)
      for (double v1 : cfg.sweep[1].values) grid.push_back({v0, v1});
  }

  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.code_version = kVersion;
  rec.seed = cfg.system.seed;
  for (const auto& ax : cfg.sweep) rec.axis_names.push_back(ax.name);
  rec.points.resize(grid.size());

  unsigned workers = opt.workers ? opt.workers : default_workers();
  const bool parallel_points = grid.size() > 1;
  unsigned engine_workers = parallel_points ? 1 : workers;

  std::vector<Row> rows(grid.size());
  parallel_for(grid.size(), parallel_points ? workers : 1, [&](std::size_t i) {
    auto& pt = rec.points[i];
    pt.index = static_cast<int>(i);
    pt.axis_values = grid[i];
    try {
      SystemBlock sys = apply_axes(cfg.system, cfg.sweep, grid[i]);
      rows[i] = execute_point(cfg, sys, derive_seed(cfg.system.seed, i), engine_workers);
      pt.ok = true;
      pt.status = "ok";
    } catch (const std::exception& e) {
      pt.ok = false;
      pt.status = std::string("failed: ") + e.what();
    }
  });

  // stable column set: first successful row defines the order
  for (const auto& r : rows)
    if (!r.kv.empty()) {
      for (const auto& [k, v] : r.kv) rec.columns.push_back(k);
      break;
    }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& pt = rec.points[i];
    if (!pt.ok) {
      ++rec.failed;
      continue;
    }
    pt.observables.assign(rec.columns.size(), std::nan(""));
    for (const auto& [k, v] : rows[i].kv) {
      auto it = std::find(rec.columns.begin(), rec.columns.end(), k);
      if (it == rec.columns.end()) {
        rec.columns.push_back(k);
        pt.observables.push_back(v);
      } else {
        pt.observables[it - rec.columns.begin()] = v;
      }
    }
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (opt.write_outputs) {
    namespace fs = std::filesystem;
    fs::path dir(cfg.output.directory);
    if (cfg.output.csv) atomic_write_file(dir / "points.csv", rec.table_csv());
    if (cfg.output.json) {
      json prov;
      char hashbuf[20];
      std::snprintf(hashbuf, sizeof(hashbuf), "%016llx",
                    static_cast<unsigned long long>(rec.config_hash));
      prov["config_hash"] = hashbuf;
      prov["code_version"] = rec.code_version;
      prov["seed"] = rec.seed;
      prov["wall_seconds"] = rec.wall_seconds;
      prov["points"] = rec.points.size();
      prov["failed"] = rec.failed;
      prov["config"] = json::parse(serialize_config(cfg));
      atomic_write_file(dir / "provenance.json", prov.dump(2));
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// cross-engine validation
// ---------------------------------------------------------------------------

namespace {

CrossCheckReport check_exact_symmetric() {
  CrossCheckReport rep;
  rep.name = "exact-symmetric";
  rep.tolerance = 1e-8;
  const int n = 4;
  const double f_eff = 0.9 * n, w = 1.5;
  auto cm = collective_couplings(n, f_eff);
  auto arr = DipoleArray::uniform(n);
  Liouvillian liouv(arr, cm, w);
  SymmetricGenerator gen(n, f_eff, w);
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(0.4 * i);
  EvolveOptions eo;
  eo.rtol = 1e-11;
  eo.atol = 1e-14;
  auto ex = evolve(all_down_density(n), liouv, grid, eo);
  auto sy = evolve_symmetric(gen, gen.all_down(), grid, eo);
  double dev = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    dev = std::max(dev, std::abs(mean_sz(ex.states[i]) - gen.expect_sz(sy.states[i])));
    auto zx = zq_of_density(ex.states[i]);
    dev = std::max(dev, std::abs(zx.raw_re - gen.pair_pm(sy.states[i])));
  }
  rep.max_deviation = dev;
  rep.pass = dev <= rep.tolerance;
  rep.detail = "N=4 collective, <sz> and pair correlator over t in [0.4, 8]";
  return rep;
}

CrossCheckReport check_exact_cumulant() {
  CrossCheckReport rep;
  rep.name = "exact-cumulant";
  rep.tolerance = 1e-6;
  const int n = 2;
  auto arr = build_chain(n, 0.08, kMagicAngle);
  arr.detunings = {0.3, -0.2};
  auto cm = coupling_matrices(arr, {CouplingMode::dipolar, 0, 0, 0});
  const double w = 1.2;
  Liouvillian liouv(arr, cm, w);
  std::vector<double> grid;
  for (int i = 1; i <= 16; ++i) grid.push_back(0.5 * i);
  EvolveOptions eo;
  eo.rtol = 1e-11;
  eo.atol = 1e-14;
  auto ex = evolve(all_down_density(n), liouv, grid, eo);
  CumulantOptions co;
  co.rtol = 1e-11;
  co.atol = 1e-14;
  auto cu = evolve_cumulant(CumulantState::all_down(n), cm, w, arr, grid, co);
  double dev = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto mom = CumulantState::from_density_matrix(ex.states[i]);
    dev = std::max(dev, (mom.s - cu.states[i].s).cwiseAbs().maxCoeff());
    dev = std::max(dev, (mom.P - cu.states[i].P).cwiseAbs().maxCoeff());
    dev = std::max(dev, (mom.R - cu.states[i].R).cwiseAbs().maxCoeff());
  }
  rep.max_deviation = dev;
  rep.pass = dev <= rep.tolerance;
  rep.detail = "N=2 detuned dipolar chain; closure vacuous at N=2";
  return rep;
}

CrossCheckReport check_jump_exact(unsigned workers) {
  CrossCheckReport rep;
  rep.name = "jump-exact";
  const int n = 6;
  const double f_eff = 6.0, w = 3.0;
  auto cm = collective_couplings(n, f_eff);
  auto arr = DipoleArray::uniform(n);
  Liouvillian liouv(arr, cm, w);
  auto ss = steady_state(liouv);
  double zx = zq_of_density(ss.rho).raw_re;

  JumpOptions jo;
  jo.trajectories = 600;
  jo.t_burn = 12.0;
  jo.t_end = 30.0;
  jo.sample_dt = 1.0;
  jo.seed = 77;
  jo.workers = workers ? workers : default_workers();
  auto records = run_jump_ensemble(arr, cm, w, jo);
  std::vector<double> pr;
  for (const auto& r : records) pr.push_back(r.pair_pm.real());
  auto pm = reduce_mean_se(pr);
  rep.tolerance = 4.0 * pm.se;
  rep.max_deviation = std::abs(pm.mean - zx);
  rep.pass = rep.max_deviation <= rep.tolerance;
  rep.detail = "N=6 collective steady pair correlator, statistical tolerance 4 SE";
  return rep;
}

}  // namespace

std::vector<CrossCheckReport> validate_cross_engine(const std::string& which, unsigned workers) {
  std::vector<CrossCheckReport> out;
  if (which == "exact-symmetric" || which == "all") out.push_back(check_exact_symmetric());
  if (which == "exact-cumulant" || which == "all") out.push_back(check_exact_cumulant());
  if (which == "jump-exact" || which == "all") out.push_back(check_jump_exact(workers));
  if (out.empty())
    throw std::invalid_argument("validate: unknown check \"" + which +
                                "\" (exact-symmetric|exact-cumulant|jump-exact|all)");
  return out;
}

}  // namespace radsync
