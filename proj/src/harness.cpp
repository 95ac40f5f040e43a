#include "terraga/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "terraga/errors.hpp"

namespace terraga {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

VehicleState initial_state(const Track& track, double offset) {
  const Point2 p = track.point_at(0.0);
  const Point2 t = track.tangent_at(0.0);
  // Displaced to the left of the tangent, aligned with it, at rest.
  return {p.x - offset * t.y, p.y + offset * t.x, 0.0, 0.0, std::atan2(t.y, t.x), 0.0};
}

ReferenceState reference_at(const Track& track, const PathQuery& q) {
  const double v = track.desired_speed();
  return {q.nearest_point.x, q.nearest_point.y, v * q.tangent.x, v * q.tangent.y,
          std::atan2(q.tangent.y, q.tangent.x)};
}

// Integral of the piecewise-linear interpolant of (t_i, y_i) over [a, b].
template <class Value>
double integrate(std::span<const StepLog> logs, double a, double b, Value value) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < logs.size(); ++i) {
    const double t0 = logs[i].t, t1 = logs[i + 1].t;
    const double lo = std::max(a, t0), hi = std::min(b, t1);
    if (!(hi > lo)) continue;
    const double y0 = value(logs[i]), y1 = value(logs[i + 1]);
    const auto at = [&](double t) { return y0 + (y1 - y0) * (t - t0) / (t1 - t0); };
    total += 0.5 * (at(lo) + at(hi)) * (hi - lo);
  }
  return total;
}

}  // namespace

TrackingCost tracking_cost(std::span<const StepLog> logs, double t_c, double t_f) {
  if (!(t_c < t_f)) throw EmptyWindowError("tracking_cost: empty window");
  TrackingCost c;
  c.j_r = integrate(logs, t_c, t_f, [](const StepLog& s) { return std::abs(s.cross_track); });
  c.j_v = integrate(logs, t_c, t_f, [](const StepLog& s) { return std::abs(s.v_err); });
  c.j_tot = c.j_r + c.j_v;
  return c;
}

std::optional<double> detect_convergence(std::span<const StepLog> logs, double window,
                                         double eps, double t_start) {
  if (logs.empty()) return std::nullopt;
  std::vector<double> prefix(logs.size() + 1, 0.0);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    prefix[i + 1] = prefix[i] + logs[i].cross_track * logs[i].cross_track;
  }
  const double t_last = logs.back().t;
  std::size_t end = 0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const double t = logs[i].t;
    if (t < t_start) continue;
    if (t + window > t_last + 1e-9) break;
    end = std::max(end, i + 1);
    while (end < logs.size() && logs[end].t <= t + window + 1e-9) ++end;
    const double n = static_cast<double>(end - i);
    const double rms = std::sqrt((prefix[end] - prefix[i]) / n);
    if (rms < eps) return t;
  }
  return std::nullopt;
}

std::optional<double> dyn_band_entry(std::span<const StepLog> logs, const TerrainParams& truth,
                                     double band) {
  const auto inside = [&](const StepLog& s) {
    if (!std::isfinite(s.best_q)) return false;
    return std::abs(s.mu_s_hat - truth.mu_s) <= band * truth.mu_s &&
           std::abs(s.mu_w_hat - truth.mu_w) <= band * truth.mu_w;
  };
  std::optional<double> entry;
  for (std::size_t i = logs.size(); i-- > 0;) {
    if (!inside(logs[i])) break;
    entry = logs[i].t;
  }
  return entry;
}

RunResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  const Track track = cfg.make_track();
  const double lap_time = cfg.nominal_lap_time(track);
  const double max_time = cfg.max_time > 0.0 ? cfg.max_time : 20.0 * cfg.laps * lap_time;
  const double target_arc = cfg.laps * track.length();

  std::mt19937_64 noise_rng(derive_seed(cfg.seed, 1));
  std::normal_distribution<double> unit(0.0, 1.0);
  const double slope_estimate = cfg.terrain.slope + cfg.noise.sigma_slope * unit(noise_rng);

  PolicyContext ctx;
  ctx.track = &track;
  ctx.lookahead = cfg.baseline.lookahead;
  ctx.slope_estimate = slope_estimate;
  ctx.dt = cfg.dt_control;
  ctx.vehicle = cfg.vehicle;
  ctx.model_terrain = cfg.terrain;
  ctx.model = cfg.model;

  const bool use_ga = cfg.controller == ControllerKind::kGa;
  std::optional<CoevolutionLearner> learner;
  if (use_ga) learner.emplace(cfg.ga, derive_seed(cfg.seed, 2));

  const auto capacity = static_cast<std::size_t>(
      std::max(cfg.ga.prediction_lookback, cfg.ga.injection_horizon) + 2);
  HistoryBuffer history(capacity);
  StateEstimator estimator(cfg.estimator);

  RunResult result;
  RunSummary& summary = result.summary;
  summary.controller = to_string(cfg.controller);
  summary.seed = cfg.seed;

  VehicleState truth = initial_state(track, cfg.initial_offset);
  double progress = 0.0;
  double prev_arc = track.nearest({truth.x, truth.y}).arc_position;
  const double half_lap = 0.5 * track.length();

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * cfg.dt_control;
    const Measurement meas = corrupt(truth, t, noise_rng, cfg.noise);

    const auto start = std::chrono::steady_clock::now();
    const VehicleState est = estimator.update(meas);
    const PathQuery est_q = track.nearest({est.x, est.y});
    HistoryEntry entry;
    entry.t = t;
    entry.state = est;
    entry.reference = reference_at(track, est_q);
    entry.features = compute_features(est, ctx);
    history.push(entry);

    StepLog row;
    Action action;
    ControllerMode mode = ControllerMode::kBaseline;
    if (use_ga) {
      const auto eval = learner->evaluate(history, ctx);
      mode = eval.mode;
      action = mode == ControllerMode::kLearned
                   ? policy_action(eval.best_ctrl, entry.features, cfg.vehicle)
                   : baseline_action(est, track, cfg.baseline, cfg.vehicle);
      history.set_last_action(action);
      if (mode == ControllerMode::kLearned && !summary.gate_time) summary.gate_time = t;
      row.best_q = eval.q_evaluated ? eval.best_q : std::numeric_limits<double>::quiet_NaN();
      row.mu_s_hat = eval.best_dyn.mu_s();
      row.mu_w_hat = eval.best_dyn.mu_w();
      row.best_c = eval.best_c;
      result.generations.push_back({learner->generation(), t, eval.best_q, eval.best_dyn,
                                    eval.best_c, eval.best_ctrl, mode});
      learner->evolve(history);
    } else {
      action = baseline_action(est, track, cfg.baseline, cfg.vehicle);
      history.set_last_action(action);
    }
    const auto stop = std::chrono::steady_clock::now();

    const PathQuery q = track.nearest({truth.x, truth.y});
    double d_arc = q.arc_position - prev_arc;
    if (d_arc > half_lap) d_arc -= track.length();
    if (d_arc < -half_lap) d_arc += track.length();
    progress += d_arc;
    prev_arc = q.arc_position;

    row.t = t;
    row.truth = truth;
    row.estimate = est;
    row.action = action;
    row.cross_track = q.cross_track;
    row.v_err = cfg.desired_speed - truth.forward_speed();
    row.mode = mode;
    row.comp_ms = cfg.record_timing
                      ? std::chrono::duration<double, std::milli>(stop - start).count()
                      : 0.0;
    result.steps.push_back(row);

    if (progress >= target_arc || t >= max_time) break;
    try {
      truth = step(truth, action, cfg.dt_control, cfg.vehicle, cfg.terrain, cfg.model);
    } catch (const NonFiniteError&) {
      throw NonFiniteError("simulation diverged after row " + std::to_string(k), k);
    }
  }

  const std::span<const StepLog> logs(result.steps);
  summary.steps = logs.size();
  summary.t_f = logs.back().t;
  summary.laps_completed = progress / track.length();

  const double window = cfg.convergence_window > 0.0 ? cfg.convergence_window : lap_time;
  std::optional<double> t_c;
  if (!use_ga) {
    t_c = detect_convergence(logs, window, cfg.convergence_eps);
  } else if (summary.gate_time) {
    t_c = detect_convergence(logs, window, cfg.convergence_eps, *summary.gate_time);
  }
  summary.converged = t_c.has_value() && *t_c < summary.t_f;
  summary.t_c = summary.converged ? *t_c : 0.0;
  if (summary.t_f > 0.0) {
    summary.cost_full = tracking_cost(logs, 0.0, summary.t_f);
    summary.cost = summary.converged ? tracking_cost(logs, summary.t_c, summary.t_f)
                                     : summary.cost_full;
  }

  if (use_ga) {
    summary.dyn_band_entry_time = dyn_band_entry(logs, cfg.terrain, cfg.dyn_band);
    summary.final_dyn = result.generations.back().best_dyn;
    summary.final_ctrl = result.generations.back().best_ctrl;
    summary.rank_deficient_injections = learner->rank_deficient_injections();
  }

  double sum = 0.0, sum_sq = 0.0;
  for (const auto& s : logs) {
    sum += s.comp_ms;
    sum_sq += s.comp_ms * s.comp_ms;
  }
  const double n = static_cast<double>(logs.size());
  summary.comp_ms_mean = sum / n;
  summary.comp_ms_std = std::sqrt(std::max(0.0, sum_sq / n - summary.comp_ms_mean * summary.comp_ms_mean));
  return result;
}

}  // namespace terraga
