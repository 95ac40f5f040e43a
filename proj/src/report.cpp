#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "terraga/errors.hpp"
#include "terraga/harness.hpp"

namespace terraga {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

const char* mode_name(ControllerMode mode) {
  return mode == ControllerMode::kLearned ? "learned" : "baseline";
}

// Shortest text that reads back to the same double; "nan" for missing values.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json cost_json(const TrackingCost& c) {
  return {{"J_r", c.j_r}, {"J_V", c.j_v}, {"J_tot", c.j_tot}};
}

json summary_json(const RunSummary& s) {
  json j;
  j["controller"] = s.controller;
  j["seed"] = s.seed;
  j["cost"] = cost_json(s.cost);
  j["cost_full"] = cost_json(s.cost_full);
  j["converged"] = s.converged;
  j["T_c"] = s.t_c;
  j["T_f"] = s.t_f;
  j["gate_time"] = optional_json(s.gate_time);
  j["dyn_band_entry_time"] = optional_json(s.dyn_band_entry_time);
  j["comp_ms_mean"] = s.comp_ms_mean;
  j["comp_ms_std"] = s.comp_ms_std;
  j["laps_completed"] = s.laps_completed;
  j["steps"] = s.steps;
  if (s.final_dyn) {
    j["final_dyn"] = {{"mu_s", s.final_dyn->mu_s()}, {"mu_w", s.final_dyn->mu_w()}};
  } else {
    j["final_dyn"] = nullptr;
  }
  j["final_ctrl"] = s.final_ctrl ? json(s.final_ctrl->genes) : json(nullptr);
  j["rank_deficient_injections"] = s.rank_deficient_injections;
  return j;
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;
};

template <class F>
Stats stats(const std::vector<ComparisonRow>& rows, F value) {
  Stats s;
  if (rows.empty()) return s;
  for (const auto& r : rows) s.mean += value(r);
  s.mean /= static_cast<double>(rows.size());
  for (const auto& r : rows) s.std += std::pow(value(r) - s.mean, 2);
  s.std = rows.size() > 1 ? std::sqrt(s.std / static_cast<double>(rows.size() - 1)) : 0.0;
  return s;
}

double ratio(double a, double b) {
  return b != 0.0 ? a / b : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void write_steps_csv(std::span<const StepLog> steps, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "t,x,y,vx,vy,psi,psi_dot,x_est,y_est,vx_est,vy_est,psi_est,psi_dot_est,phi,omega_w,"
         "cross_track,v_err,mode,comp_ms,best_Q,mu_s_hat,mu_w_hat,best_C\n";
  std::string line;
  for (const auto& s : steps) {
    line.clear();
    auto it = std::back_inserter(line);
    fmt::format_to(it, "{}", num(s.t));
    for (double v : s.truth.to_array()) fmt::format_to(it, ",{}", num(v));
    for (double v : s.estimate.to_array()) fmt::format_to(it, ",{}", num(v));
    fmt::format_to(it, ",{},{},{},{},{},{},{},{},{},{}\n", num(s.action.phi),
                   num(s.action.omega_w), num(s.cross_track), num(s.v_err), mode_name(s.mode),
                   num(s.comp_ms), num(s.best_q), num(s.mu_s_hat), num(s.mu_w_hat),
                   num(s.best_c));
    out << line;
  }
}

void write_generations_csv(std::span<const GenerationLog> gens,
                           const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "generation,t,best_Q,mu_s,mu_w,best_C,k11,k12,k13,k21,k22,k23,mode\n";
  for (const auto& g : gens) {
    std::string line = fmt::format("{},{},{},{},{},{}", g.generation, num(g.t), num(g.best_q),
                                   num(g.best_dyn.mu_s()), num(g.best_dyn.mu_w()),
                                   num(g.best_c));
    for (double k : g.best_ctrl.genes) line += "," + num(k);
    line += fmt::format(",{}\n", mode_name(g.mode));
    out << line;
  }
}

void write_summary_json(const RunSummary& summary, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << summary_json(summary).dump(2) << '\n';
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_steps_csv(result.steps, dir / "steps.csv");
  write_generations_csv(result.generations, dir / "generations.csv");
  write_summary_json(result.summary, dir / "summary.json");
}

std::string ComparisonReport::to_text() const {
  std::ostringstream os;
  os << fmt::format("{:>6} | {:>10} {:>10} {:>10} {:>8} {:>9} | {:>10} {:>10} {:>10} {:>8} {:>9} | {:>8}\n",
                    "seed", "J_r", "J_V", "J_tot", "T_c", "ms", "J_r", "J_V", "J_tot", "T_c", "ms",
                    "ratio");
  os << fmt::format("{:>6} | {:^50} | {:^50} |\n", "", label_a, label_b);
  const auto tc = [](const RunSummary& s) {
    return s.converged ? fmt::format("{:8.1f}", s.t_c) : std::string("       -");
  };
  for (const auto& r : rows) {
    os << fmt::format(
        "{:>6} | {:10.4f} {:10.4f} {:10.4f} {} {:9.3f} | {:10.4f} {:10.4f} {:10.4f} {} {:9.3f} | "
        "{:8.3f}\n",
        r.seed, r.a.cost.j_r, r.a.cost.j_v, r.a.cost.j_tot, tc(r.a), r.a.comp_ms_mean,
        r.b.cost.j_r, r.b.cost.j_v, r.b.cost.j_tot, tc(r.b), r.b.comp_ms_mean,
        ratio(r.b.cost.j_tot, r.a.cost.j_tot));
  }
  if (rows.size() > 1) {
    const auto line = [&](const char* name, auto pick) {
      const Stats a = stats(rows, [&](const ComparisonRow& r) { return pick(r.a); });
      const Stats b = stats(rows, [&](const ComparisonRow& r) { return pick(r.b); });
      os << fmt::format("{:>10}: {:10.4f} +- {:<10.4f} | {:10.4f} +- {:<10.4f}\n", name, a.mean,
                        a.std, b.mean, b.std);
    };
    os << "mean +- std over " << rows.size() << " seeds (" << label_a << " | " << label_b
       << ")\n";
    line("J_r", [](const RunSummary& s) { return s.cost.j_r; });
    line("J_V", [](const RunSummary& s) { return s.cost.j_v; });
    line("J_tot", [](const RunSummary& s) { return s.cost.j_tot; });
    line("T_f", [](const RunSummary& s) { return s.t_f; });
    line("comp_ms", [](const RunSummary& s) { return s.comp_ms_mean; });
  }
  return os.str();
}

std::string ComparisonReport::to_json() const {
  json j;
  j["label_a"] = label_a;
  j["label_b"] = label_b;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"seed", r.seed},
                         {"a", summary_json(r.a)},
                         {"b", summary_json(r.b)},
                         {"delta_J_tot", r.b.cost.j_tot - r.a.cost.j_tot},
                         {"ratio_J_tot", ratio(r.b.cost.j_tot, r.a.cost.j_tot)}});
  }
  const auto agg = [&](auto pick) {
    const Stats a = stats(rows, [&](const ComparisonRow& r) { return pick(r.a); });
    const Stats b = stats(rows, [&](const ComparisonRow& r) { return pick(r.b); });
    return json{{"a", {{"mean", a.mean}, {"std", a.std}}}, {"b", {{"mean", b.mean}, {"std", b.std}}}};
  };
  j["aggregate"] = {
      {"J_r", agg([](const RunSummary& s) { return s.cost.j_r; })},
      {"J_V", agg([](const RunSummary& s) { return s.cost.j_v; })},
      {"J_tot", agg([](const RunSummary& s) { return s.cost.j_tot; })},
      {"T_c", agg([](const RunSummary& s) { return s.t_c; })},
      {"T_f", agg([](const RunSummary& s) { return s.t_f; })},
      {"comp_ms_mean", agg([](const RunSummary& s) { return s.comp_ms_mean; })},
  };
  return j.dump(2) + "\n";
}

ComparisonReport compare(const ExperimentConfig& cfg_a, const ExperimentConfig& cfg_b,
                         std::span<const std::uint64_t> seeds,
                         const std::optional<std::filesystem::path>& out_dir) {
  if (cfg_a.laps != cfg_b.laps) throw ConfigError("compare: configs differ in lap count");
  ComparisonReport report;
  report.label_a = to_string(cfg_a.controller);
  report.label_b = to_string(cfg_b.controller);
  if (report.label_a == report.label_b) {
    report.label_a += "_a";
    report.label_b += "_b";
  }
  for (const auto seed : seeds) {
    ExperimentConfig a = cfg_a, b = cfg_b;
    a.seed = b.seed = seed;
    const RunResult ra = run(a);
    const RunResult rb = run(b);
    if (out_dir) {
      const auto sub = "seed_" + std::to_string(seed);
      write_outputs(ra, *out_dir / report.label_a / sub);
      write_outputs(rb, *out_dir / report.label_b / sub);
    }
    report.rows.push_back({std::to_string(seed), seed, ra.summary, rb.summary});
  }
  return report;
}

}  // namespace terraga
