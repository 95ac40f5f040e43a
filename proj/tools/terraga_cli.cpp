// terraga: run or compare closed-loop tracking experiments.
//
//   terraga run --config configs/default.ini --controller ga --out out/ga
//   terraga compare --config configs/default.ini --seeds 1,2,3 --out out/cmp

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "terraga/errors.hpp"
#include "terraga/harness.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string controller;
  int laps = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string track;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--laps", o.laps, "lap count")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--track", o.track, "track file, one 'x y' waypoint per line")
      ->check(CLI::ExistingFile);
}

terraga::ExperimentConfig build_config(const std::string& path, const Overrides& o) {
  terraga::ExperimentConfig cfg = path.empty() ? terraga::ExperimentConfig{} : terraga::load_config(path);
  if (!o.controller.empty()) cfg.controller = terraga::parse_controller(o.controller);
  if (o.laps > 0) cfg.laps = o.laps;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.track.empty()) cfg.track_file = std::filesystem::path(o.track);
  cfg.validate();
  return cfg;
}

int do_run(const Overrides& o) {
  const auto cfg = build_config(o.config, o);
  const auto result = terraga::run(cfg);
  terraga::write_outputs(result, cfg.output_dir);
  const auto& s = result.summary;
  std::cout << "controller " << s.controller << ", seed " << s.seed << ", " << s.steps
            << " steps, " << s.laps_completed << " laps in " << s.t_f << " s\n"
            << "J_r " << s.cost.j_r << "  J_V " << s.cost.j_v << "  J_tot " << s.cost.j_tot
            << (s.converged ? "  (after T_c = " + std::to_string(s.t_c) + " s)"
                            : std::string("  (not converged; whole run)"))
            << "\ncomputation " << s.comp_ms_mean << " +- " << s.comp_ms_std << " ms/step\n";
  if (s.gate_time) std::cout << "learned policy engaged at " << *s.gate_time << " s\n";
  if (s.final_dyn) {
    std::cout << "final mu_s " << s.final_dyn->mu_s() << ", mu_w " << s.final_dyn->mu_w() << "\n";
  }
  std::cout << "outputs in " << cfg.output_dir.string() << "\n";
  return 0;
}

int do_compare(const Overrides& o, const std::string& config_b, const std::string& controller_b,
               std::vector<std::uint64_t> seeds) {
  Overrides oa = o;
  if (oa.controller.empty()) oa.controller = "baseline";
  Overrides ob = o;
  ob.controller = controller_b.empty() ? "ga" : controller_b;
  const auto a = build_config(o.config, oa);
  const auto b = build_config(config_b.empty() ? o.config : config_b, ob);
  if (seeds.empty()) seeds.push_back(a.seed);

  std::optional<std::filesystem::path> out;
  if (!o.out.empty()) out = std::filesystem::path(o.out);
  const auto report = terraga::compare(a, b, seeds, out);
  std::cout << report.to_text();
  if (out) {
    std::filesystem::create_directories(*out);
    std::ofstream(*out / "comparison.txt") << report.to_text();
    std::ofstream(*out / "comparison.json") << report.to_json();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terraga: GA co-evolution of friction model and tracking gains"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run_cmd = app.add_subcommand("run", "run one experiment and write its logs");
  add_common(run_cmd, run_opts);
  run_cmd->add_option("--controller", run_opts.controller, "baseline or ga")
      ->check(CLI::IsMember({"baseline", "ga"}));
  run_cmd->add_option("--seed", run_opts.seed, "random seed");

  Overrides cmp_opts;
  std::string config_b, controller_b;
  std::vector<std::uint64_t> seeds;
  auto* cmp_cmd = app.add_subcommand("compare", "run two controllers on the same seeds");
  add_common(cmp_cmd, cmp_opts);
  cmp_cmd->add_option("--controller", cmp_opts.controller, "first controller (default baseline)")
      ->check(CLI::IsMember({"baseline", "ga"}));
  cmp_cmd->add_option("--controller-b", controller_b, "second controller (default ga)")
      ->check(CLI::IsMember({"baseline", "ga"}));
  cmp_cmd->add_option("--config-b", config_b, "config for the second run (default: --config)")
      ->check(CLI::ExistingFile);
  cmp_cmd->add_option("--seed", cmp_opts.seed, "single seed");
  cmp_cmd->add_option("--seeds", seeds, "comma separated seeds")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return do_run(run_opts);
    if (cmp_opts.seed && seeds.empty()) seeds.push_back(*cmp_opts.seed);
    return do_compare(cmp_opts, config_b, controller_b, seeds);
  } catch (const terraga::NonFiniteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
