#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "radsync/geometry.hpp"
#include "radsync/meanfield.hpp"

namespace radsync {

enum class Engine { meanfield, exact, symmetric, cumulant, jump, qsd };

enum class RepumpPolicy { fixed, half_feff, optimal_scan };

struct SweepAxis {
  std::string name;            // W, f_eff, alpha, theta, spacing_over_lambda, Delta
  std::vector<double> values;  // explicit, or generated from range
};

struct DetuningSpec {
  std::string kind = "none";  // none | lorentzian | uniform | list | file
  double width = 0.0;
  std::vector<double> values;
  std::string path;
};

struct SystemBlock {
  std::string mode = "collective";  // lattice | collective | dicke | powerlaw
  int n = 2;                        // collective/dicke site count
  int dimension = 1;
  int extent = 2;
  double spacing_over_lambda = 0.08;
  double theta = kMagicAngle;
  double f_eff = 15.0;
  double alpha = 0.0;
  double prefactor = 0.25;
  double repump = 1.0;
  double gamma = 1.0;
  DetuningSpec detuning;
  std::uint64_t seed = 1;
};

struct SolverBlock {
  Engine engine = Engine::meanfield;
  double rtol = 1e-9;
  double atol = 1e-12;
  double t_final = 0.0;   // 0 => engine default
  int trajectories = 100;
  double dt = 0.0;
  double t_burn = 10.0;
  double sample_dt = 0.5;
  bool u1_reduction = true;
  bool two_time = false;
  RepumpPolicy repump_policy = RepumpPolicy::fixed;
};

struct OutputBlock {
  std::string directory = "radsync_out";
  bool csv = true;
  bool json = true;
  bool per_trajectory = false;
};

struct RunConfig {
  int version = 1;
  SystemBlock system;
  SolverBlock solver;
  std::vector<SweepAxis> sweep;  // 0..2 axes
  OutputBlock output;
  std::string metadata_json;  // free-form, carried through to provenance

  void validate() const;  // throws std::invalid_argument with a schema message
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);  // canonical form (sorted keys)
std::uint64_t config_hash(const RunConfig& cfg);

struct PointResult {
  int index = 0;
  std::vector<double> axis_values;
  std::vector<double> observables;  // aligned with RunRecord::columns
  bool ok = false;
  std::string status;  // "ok" or the failure message
};

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::string code_version;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> axis_names;
  std::vector<std::string> columns;
  std::vector<PointResult> points;
  int failed = 0;

  std::string table_csv() const;  // deterministic, 17 significant digits
};

struct RunOptions {
  unsigned workers = 0;  // 0 => hardware
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> output_override;
  bool write_outputs = true;
};

/// Executes every sweep point (concurrently, deterministic in the worker
/// count), writes points.csv and provenance.json atomically, and isolates
/// per-point failures.
RunRecord run(const RunConfig& cfg, const RunOptions& opt = {});

/// Named configurations shipped with the tool; throws on unknown name.
RunConfig preset(const std::string& name);
std::vector<std::string> preset_names();

struct CrossCheckReport {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

/// Built-in cross-engine agreement checks: exact-symmetric, exact-cumulant,
/// jump-exact (statistical tolerance), or "all".
std::vector<CrossCheckReport> validate_cross_engine(const std::string& which,
                                                    unsigned workers = 0);

}  // namespace radsync
