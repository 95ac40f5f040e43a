#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "terraga/errors.hpp"
#include "terraga/harness.hpp"

namespace terraga {
namespace {

namespace fs = std::filesystem;

std::vector<StepLog> constant_log(double t_end, double dt, double cross, double verr) {
  std::vector<StepLog> logs;
  for (int k = 0; k * dt <= t_end + 1e-12; ++k) {
    StepLog s;
    s.t = k * dt;
    s.cross_track = cross;
    s.v_err = verr;
    logs.push_back(s);
  }
  return logs;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(TrackingCost, Rectangles) {
  const auto logs = constant_log(10.0, 0.2, 1.0, -0.5);
  const auto c = tracking_cost(logs, 0.0, 10.0);
  EXPECT_NEAR(c.j_r, 10.0, 1e-9);
  EXPECT_NEAR(c.j_v, 5.0, 1e-9);
  EXPECT_NEAR(c.j_tot, 15.0, 1e-9);
  const auto perfect = tracking_cost(constant_log(10.0, 0.2, 0.0, 0.0), 2.0, 7.0);
  EXPECT_EQ(perfect.j_tot, 0.0);
}

TEST(TrackingCost, LinearInterpolantBetweenRows) {
  // cross_track ramps 0 -> 1 over [0, 1]; the integral over [0.25, 0.75] is 0.25.
  std::vector<StepLog> logs(2);
  logs[1].t = 1.0;
  logs[1].cross_track = 1.0;
  EXPECT_NEAR(tracking_cost(logs, 0.25, 0.75).j_r, 0.25, 1e-15);
}

TEST(TrackingCost, AdditiveOverAdjacentWindows) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.3);
  auto logs = constant_log(50.0, 0.2, 0.0, 0.0);
  for (auto& s : logs) {
    s.cross_track = n(rng);
    s.v_err = n(rng);
  }
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 100; ++i) {
    double a = u(rng), b = u(rng), c = u(rng);
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    if (!(a < b && b < c)) continue;
    const auto whole = tracking_cost(logs, a, c);
    const auto left = tracking_cost(logs, a, b);
    const auto right = tracking_cost(logs, b, c);
    EXPECT_NEAR(left.j_tot + right.j_tot, whole.j_tot, 1e-9);
    EXPECT_GE(left.j_r, 0.0);
  }
}

TEST(TrackingCost, EmptyWindowThrows) {
  const auto logs = constant_log(10.0, 0.2, 1.0, 1.0);
  EXPECT_THROW(tracking_cost(logs, 4.0, 4.0), EmptyWindowError);
  EXPECT_THROW(tracking_cost(logs, 5.0, 4.0), EmptyWindowError);
}

TEST(Convergence, ImmediateAndNever) {
  const auto good = constant_log(100.0, 0.2, 0.01, 0.0);
  const auto t0 = detect_convergence(good, 41.4, 0.05);
  ASSERT_TRUE(t0.has_value());
  EXPECT_EQ(*t0, 0.0);
  EXPECT_FALSE(detect_convergence(constant_log(100.0, 0.2, 0.3, 0.0), 41.4, 0.05).has_value());
  // Window longer than the log.
  EXPECT_FALSE(detect_convergence(good, 200.0, 0.05).has_value());
}

TEST(Convergence, SyntheticEntry) {
  auto logs = constant_log(400.0, 0.2, 0.01, 0.0);
  for (auto& s : logs) {
    if (s.t < 217.0 - 1e-9) s.cross_track = 5.0;
  }
  const auto t = detect_convergence(logs, 41.4, 0.05);
  ASSERT_TRUE(t.has_value());
  EXPECT_NEAR(*t, 217.0, 0.2 + 1e-9);
  const auto late = detect_convergence(logs, 41.4, 0.05, 300.0);
  ASSERT_TRUE(late.has_value());
  EXPECT_NEAR(*late, 300.0, 1e-9);
}

TEST(DynBand, EntryIsStartOfFinalInBandRun) {
  auto logs = constant_log(10.0, 1.0, 0.0, 0.0);
  const TerrainParams truth;
  const double ms[] = {0, 5, 5, 9, 5.5, 4.2, 5, 5.9, 5.1, 4.1, 4.5};
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i].best_q = 1e-4;
    logs[i].mu_s_hat = ms[i];
    logs[i].mu_w_hat = 1.1;
  }
  const auto e = dyn_band_entry(logs, truth, 0.2);
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(*e, 4.0);
  logs.back().mu_w_hat = 1.3;
  EXPECT_FALSE(dyn_band_entry(logs, truth, 0.2).has_value());
}

ExperimentConfig quiet_baseline() {
  ExperimentConfig cfg;
  cfg.controller = ControllerKind::kBaseline;
  cfg.laps = 1;
  cfg.noise = {0.0, 0.0, 0.0};
  cfg.record_timing = false;
  return cfg;
}

TEST(Run, BaselineOneLapNoiseless) {
  const auto r = run(quiet_baseline());
  const auto& s = r.summary;
  EXPECT_EQ(s.controller, "baseline");
  EXPECT_GE(s.laps_completed, 1.0);
  EXPECT_LT(s.laps_completed, 1.01);
  EXPECT_EQ(s.steps, r.steps.size());
  EXPECT_NEAR(s.t_f, r.steps.back().t, 1e-12);
  EXPECT_TRUE(r.generations.empty());
  EXPECT_FALSE(s.final_dyn.has_value());
  EXPECT_FALSE(s.gate_time.has_value());
  EXPECT_NEAR(std::hypot(r.steps[0].cross_track, 0.0), 0.3, 1e-9);
  for (const auto& row : r.steps) {
    EXPECT_EQ(row.mode, ControllerMode::kBaseline);
    EXPECT_EQ(row.comp_ms, 0.0);
    EXPECT_TRUE(std::isnan(row.best_q));
    // Noiseless measurements: the estimated pose is the truth.
    EXPECT_NEAR(row.estimate.x, row.truth.x, 1e-12);
  }
  EXPECT_GT(s.cost_full.j_tot, 0.0);
  EXPECT_NEAR(s.cost_full.j_tot, tracking_cost(r.steps, 0.0, s.t_f).j_tot, 1e-12);
}

TEST(Run, LapLimitAndTimeLimit) {
  auto cfg = quiet_baseline();
  cfg.max_time = 10.0;
  const auto r = run(cfg);
  EXPECT_NEAR(r.summary.t_f, 10.0, 1e-9);
  EXPECT_LT(r.summary.laps_completed, 1.0);
  EXPECT_EQ(r.summary.steps, 51u);
}

TEST(Run, GaRunDeterministicToTheByte) {
  ExperimentConfig cfg;
  cfg.laps = 1;
  cfg.max_time = 30.0;
  cfg.record_timing = false;
  cfg.seed = 3;
  const auto dir = fs::temp_directory_path() / "terraga_det";
  fs::remove_all(dir);
  write_outputs(run(cfg), dir / "a");
  write_outputs(run(cfg), dir / "b");
  for (const char* f : {"steps.csv", "generations.csv", "summary.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  cfg.seed = 4;
  write_outputs(run(cfg), dir / "c");
  EXPECT_NE(slurp(dir / "a" / "steps.csv"), slurp(dir / "c" / "steps.csv"));
  fs::remove_all(dir);
}

TEST(Run, TimingDoesNotPerturbTrajectory) {
  ExperimentConfig cfg;
  cfg.laps = 1;
  cfg.max_time = 10.0;
  cfg.record_timing = false;
  const auto a = run(cfg);
  cfg.record_timing = true;
  const auto b = run(cfg);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].truth, b.steps[i].truth);
    EXPECT_EQ(a.steps[i].action.phi, b.steps[i].action.phi);
    EXPECT_GT(b.steps[i].comp_ms, 0.0);
  }
}

TEST(Run, GaLogsOneGenerationPerStep) {
  ExperimentConfig cfg;
  cfg.laps = 1;
  cfg.max_time = 8.0;
  cfg.record_timing = false;
  const auto r = run(cfg);
  ASSERT_EQ(r.generations.size(), r.steps.size());
  for (std::size_t i = 0; i < r.generations.size(); ++i) {
    EXPECT_EQ(r.generations[i].generation, i);
    EXPECT_EQ(r.generations[i].t, r.steps[i].t);
  }
  EXPECT_TRUE(std::isnan(r.steps[0].best_q));
  EXPECT_TRUE(std::isfinite(r.steps[1].best_q));
  ASSERT_TRUE(r.summary.final_dyn.has_value());
}

TEST(Outputs, FileSchemas) {
  auto cfg = quiet_baseline();
  cfg.max_time = 2.0;
  const auto dir = fs::temp_directory_path() / "terraga_schema";
  fs::remove_all(dir);
  write_outputs(run(cfg), dir);
  std::ifstream steps(dir / "steps.csv");
  std::string header;
  std::getline(steps, header);
  EXPECT_EQ(header,
            "t,x,y,vx,vy,psi,psi_dot,x_est,y_est,vx_est,vy_est,psi_est,psi_dot_est,phi,omega_w,"
            "cross_track,v_err,mode,comp_ms,best_Q,mu_s_hat,mu_w_hat,best_C");
  int rows = 0;
  for (std::string line; std::getline(steps, line);) ++rows;
  EXPECT_EQ(rows, 11);
  std::ifstream gens(dir / "generations.csv");
  std::getline(gens, header);
  EXPECT_EQ(header, "generation,t,best_Q,mu_s,mu_w,best_C,k11,k12,k13,k21,k22,k23,mode");
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  for (const char* key : {"controller", "seed", "cost", "converged", "T_c", "T_f",
                          "comp_ms_mean", "comp_ms_std", "laps_completed"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_TRUE(j["cost"].contains("J_tot"));
  EXPECT_EQ(j["controller"], "baseline");
  fs::remove_all(dir);
}

TEST(Compare, IdenticalConfigsHaveZeroDelta) {
  auto cfg = quiet_baseline();
  cfg.max_time = 20.0;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto rep = compare(cfg, cfg, seeds);
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_NE(rep.label_a, rep.label_b);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.a.cost.j_tot, row.b.cost.j_tot);
  }
  const auto j = nlohmann::json::parse(rep.to_json());
  ASSERT_EQ(j["rows"].size(), 3u);
  for (const auto& row : j["rows"]) EXPECT_EQ(row["delta_J_tot"], 0.0);
  EXPECT_NE(rep.to_text().find("mean"), std::string::npos);
}

TEST(Compare, LapMismatchRejected) {
  auto a = quiet_baseline();
  auto b = a;
  b.laps = 2;
  const std::vector<std::uint64_t> seeds{1};
  EXPECT_THROW(compare(a, b, seeds), ConfigError);
}

}  // namespace
}  // namespace terraga
