#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "terraga/baseline_control.hpp"
#include "terraga/estimation.hpp"
#include "terraga/ga_learner.hpp"
#include "terraga/track.hpp"
#include "terraga/vehicle_dynamics.hpp"

namespace terraga {

enum class ControllerKind { kBaseline, kGa };

std::string to_string(ControllerKind kind);
ControllerKind parse_controller(const std::string& name);

struct StadiumSpec {
  double length = 3.0;   // m, footprint along the long axis
  double width = 2.0;    // m
  double heading = deg2rad(45.0);  // rad, long axis relative to +x (downslope)
  double spacing = 0.05; // m between waypoints
};

struct ExperimentConfig {
  VehicleParams vehicle;
  TerrainParams terrain;
  ModelSettings model;

  std::optional<std::filesystem::path> track_file;  // stadium when empty
  StadiumSpec stadium;
  double desired_speed = 0.2;

  BaselineConfig baseline;
  GAConfig ga;
  NoiseModel noise;
  EstimatorConfig estimator;

  ControllerKind controller = ControllerKind::kGa;
  int laps = 10;
  std::uint64_t seed = 1;
  double dt_control = 0.2;
  double initial_offset = 0.3;      // m, lateral displacement at the start
  double convergence_window = 0.0;  // s, 0 means one nominal lap
  double convergence_eps = 0.05;    // m, RMS cross-track band
  double max_time = 0.0;            // s, 0 means 20 nominal run times
  bool record_timing = true;        // false writes zero computation times
  double dyn_band = 0.2;            // relative band for reporting identification
  std::filesystem::path output_dir = "out";

  void validate() const;
  Track make_track() const;
  double nominal_lap_time(const Track& track) const;
};

/// Reads an INI-style file with sections vehicle, terrain, model, track,
/// baseline, ga, noise, estimator and experiment. Relative track paths
/// resolve against the config file's directory. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = {});

struct StepLog {
  double t = 0.0;
  VehicleState truth;
  VehicleState estimate;
  Action action;
  double cross_track = 0.0;
  double v_err = 0.0;  // V_d - V . b1 of the true state
  ControllerMode mode = ControllerMode::kBaseline;
  double comp_ms = 0.0;
  double best_q = std::numeric_limits<double>::quiet_NaN();
  double mu_s_hat = std::numeric_limits<double>::quiet_NaN();
  double mu_w_hat = std::numeric_limits<double>::quiet_NaN();
  double best_c = std::numeric_limits<double>::quiet_NaN();
};

struct GenerationLog {
  std::size_t generation = 0;
  double t = 0.0;
  double best_q = 0.0;
  DynChromosome best_dyn;
  double best_c = 0.0;
  CtrlChromosome best_ctrl;
  ControllerMode mode = ControllerMode::kBaseline;
};

struct TrackingCost {
  double j_r = 0.0;
  double j_v = 0.0;
  double j_tot = 0.0;
};

struct RunSummary {
  std::string controller;
  std::uint64_t seed = 0;
  TrackingCost cost;       // over [t_c, t_f]
  TrackingCost cost_full;  // over [0, t_f]
  bool converged = false;
  double t_c = 0.0;
  double t_f = 0.0;
  std::optional<double> gate_time;
  std::optional<double> dyn_band_entry_time;
  double comp_ms_mean = 0.0;
  double comp_ms_std = 0.0;
  double laps_completed = 0.0;
  std::size_t steps = 0;
  std::optional<DynChromosome> final_dyn;
  std::optional<CtrlChromosome> final_ctrl;
  std::size_t rank_deficient_injections = 0;
};

struct RunResult {
  RunSummary summary;
  std::vector<StepLog> steps;
  std::vector<GenerationLog> generations;
};

/// Runs one closed-loop experiment. Deterministic per config and seed apart
/// from the recorded computation times.
RunResult run(const ExperimentConfig& cfg);

/// Trapezoidal integrals of |cross_track| and |v_err| over [t_c, t_f],
/// linearly interpolating between log rows. Throws EmptyWindowError when
/// t_c >= t_f.
TrackingCost tracking_cost(std::span<const StepLog> logs, double t_c, double t_f);

/// Earliest row time t >= t_start whose window [t, t + window] lies inside
/// the log and has RMS cross-track below eps.
std::optional<double> detect_convergence(std::span<const StepLog> logs, double window,
                                         double eps, double t_start = 0.0);

/// Earliest row time after which both friction estimates stay within the
/// relative band around the true coefficients.
std::optional<double> dyn_band_entry(std::span<const StepLog> logs, const TerrainParams& truth,
                                     double band);

void write_steps_csv(std::span<const StepLog> steps, const std::filesystem::path& path);
void write_generations_csv(std::span<const GenerationLog> gens, const std::filesystem::path& path);
void write_summary_json(const RunSummary& summary, const std::filesystem::path& path);
/// steps.csv, generations.csv and summary.json in `dir`.
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

struct ComparisonRow {
  std::string label;
  std::uint64_t seed = 0;
  RunSummary a;
  RunSummary b;
};

struct ComparisonReport {
  std::string label_a;
  std::string label_b;
  std::vector<ComparisonRow> rows;

  std::string to_text() const;
  std::string to_json() const;
};

/// Runs both configs for every seed; per-run outputs go to
/// `out_dir/<label>/seed_<n>` when `out_dir` is set.
ComparisonReport compare(const ExperimentConfig& cfg_a, const ExperimentConfig& cfg_b,
                         std::span<const std::uint64_t> seeds,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace terraga
