#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "radsync/run.hpp"
#include "radsync/util.hpp"
#include "radsync/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"radsync - synchronization of incoherently pumped radiating dipole arrays"};
  app.set_version_flag("--version", radsync::kVersion);
  app.require_subcommand(1);

  // run
  std::string config_path, preset_name, output_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned workers = 0;
  auto* run_cmd = app.add_subcommand("run", "execute a sweep described by a config file");
  run_cmd->add_option("config", config_path, "path to a JSON run configuration");
  run_cmd->add_option("--preset", preset_name, "use a named preset instead of a file");
  run_cmd->add_option("--output-dir", output_dir, "override the output directory");
  run_cmd
      ->add_option_function<std::uint64_t>(
          "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; }, "override the run seed")
      ->expected(1);
  run_cmd->add_option("--workers", workers, "worker threads (default: hardware)");

  // preset
  std::string preset_out;
  bool list_presets = false;
  auto* preset_cmd = app.add_subcommand("preset", "emit a named configuration");
  preset_cmd->add_option("name", preset_name, "preset name");
  preset_cmd->add_option("-o,--output", preset_out, "write to a file instead of stdout");
  preset_cmd->add_flag("--list", list_presets, "list available presets");

  // validate
  std::string which = "all";
  auto* val_cmd = app.add_subcommand("validate", "cross-engine agreement checks");
  val_cmd->add_option("check", which,
                      "exact-symmetric | exact-cumulant | jump-exact | all (default)");
  val_cmd->add_option("--workers", workers, "worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (config_path.empty() == preset_name.empty()) {
        std::fprintf(stderr, "run: give exactly one of a config path or --preset\n");
        return 2;
      }
      radsync::RunConfig cfg = config_path.empty() ? radsync::preset(preset_name)
                                                   : radsync::load_config(config_path);
      radsync::RunOptions opt;
      opt.workers = workers;
      if (seed_set) opt.seed_override = seed;
      if (!output_dir.empty()) opt.output_override = output_dir;
      radsync::RunRecord rec = radsync::run(cfg, opt);
      std::printf("points: %zu  failed: %d  wall: %.2fs  hash: %016llx\n", rec.points.size(),
                  rec.failed, rec.wall_seconds,
                  static_cast<unsigned long long>(rec.config_hash));
      std::printf("output: %s\n", cfg.output.directory.c_str());
      return rec.failed == 0 ? 0 : 1;
    }
    if (*preset_cmd) {
      if (list_presets) {
        for (const auto& n : radsync::preset_names()) std::printf("%s\n", n.c_str());
        return 0;
      }
      if (preset_name.empty()) {
        std::fprintf(stderr, "preset: name required (or --list)\n");
        return 2;
      }
      std::string text = radsync::serialize_config(radsync::preset(preset_name));
      if (preset_out.empty()) {
        std::printf("%s\n", text.c_str());
      } else {
        radsync::atomic_write_file(preset_out, text + "\n");
      }
      return 0;
    }
    if (*val_cmd) {
      auto reports = radsync::validate_cross_engine(which, workers);
      bool all_pass = true;
      for (const auto& r : reports) {
        std::printf("[%s] %-16s max deviation %.3e  tolerance %.3e  (%s)\n",
                    r.pass ? "PASS" : "FAIL", r.name.c_str(), r.max_deviation, r.tolerance,
                    r.detail.c_str());
        all_pass = all_pass && r.pass;
      }
      return all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
