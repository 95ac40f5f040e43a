#include "terraga/ga_learner.hpp"

#include <Eigen/Dense>

#include "terraga/errors.hpp"

namespace terraga {

namespace {

template <std::size_t N>
std::array<double, N> scales_from(const GeneBounds<N>& bounds, double fraction) {
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = fraction * (bounds.upper[i] - bounds.lower[i]);
  return out;
}

template <std::size_t N>
void check_bounds(const GeneBounds<N>& bounds, const char* name) {
  for (std::size_t i = 0; i < N; ++i) {
    if (!std::isfinite(bounds.lower[i]) || !std::isfinite(bounds.upper[i]) ||
        !(bounds.lower[i] <= bounds.upper[i])) {
      throw ConfigError(std::string("ga.") + name + " bounds must be finite with lower <= upper");
    }
  }
}

template <class C>
void sort_by_fitness(std::vector<C>& population, std::vector<double>& fitness) {
  const auto order = rank_order(fitness);
  std::vector<C> pop;
  std::vector<double> fit;
  pop.reserve(order.size());
  fit.reserve(order.size());
  for (const auto i : order) {
    pop.push_back(population[i]);
    fit.push_back(fitness[i]);
  }
  population = std::move(pop);
  fitness = std::move(fit);
}

std::array<double, 6> as_vector(const ReferenceState& r) {
  return {r.x, r.y, r.vx, r.vy, r.psi, 0.0};
}

}  // namespace

std::array<double, 2> GAConfig::dyn_mutation_scales() const {
  return scales_from(dyn_bounds, mutation_fraction);
}

std::array<double, 6> GAConfig::ctrl_mutation_scales() const {
  return scales_from(ctrl_bounds, mutation_fraction);
}

void GAConfig::validate() const {
  if (prediction_lookback < 1 || tracking_horizon < 1 || injection_horizon < 1) {
    throw ConfigError("ga horizons must be >= 1");
  }
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
    throw ConfigError("ga.crossover_rate must lie in [0, 1]");
  }
  if (dyn_population < 1 || ctrl_population < 1 || breeders < 0 || injected < 0) {
    throw ConfigError("ga population sizes must be >= 1 and counts >= 0");
  }
  if (breeders + injected > std::min(dyn_population, ctrl_population)) {
    throw ConfigError("ga.breeders + ga.injected must not exceed the population size");
  }
  for (const auto* w : {&w_s, &w_r, &w_k}) {
    for (double v : *w) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("ga weights must be finite and >= 0");
    }
  }
  check_bounds(dyn_bounds, "dyn");
  check_bounds(ctrl_bounds, "ctrl");
  if (dyn_bounds.lower[0] < 0.0 || dyn_bounds.lower[1] < 0.0) {
    throw ConfigError("ga.dyn lower bounds must be >= 0");
  }
  if (!(mutation_fraction > 0.0)) throw ConfigError("ga.mutation_fraction must be positive");
  if (!(ridge_lambda > 0.0)) throw ConfigError("ga.ridge_lambda must be positive");
  if (gate_window < 1) throw ConfigError("ga.gate_window must be >= 1");
}

PolicyFeatures compute_features(const VehicleState& state, const PolicyContext& ctx) {
  const Pose2 pose{state.x, state.y, state.psi};
  const Point2 target = lookahead(*ctx.track, pose, ctx.lookahead);
  return {intersection_angle(pose, target), ctx.track->desired_speed() - state.forward_speed(),
          ctx.slope_estimate};
}

HistoryBuffer::HistoryBuffer(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 2)) {}

void HistoryBuffer::push(const HistoryEntry& entry) {
  if (!entries_.empty() && !(entry.t > entries_.back().t)) {
    throw NonMonotoneTimeError("history: timestamps must increase");
  }
  entries_.push_back(entry);
  while (entries_.size() > capacity_) entries_.pop_front();
}

void HistoryBuffer::set_last_action(const Action& action) {
  if (entries_.empty()) throw Error("history: no entry to attach an action to");
  entries_.back().action = action;
  entries_.back().has_action = true;
}

VehicleState predict_state(const DynChromosome& dyn, const HistoryBuffer& history,
                           int lookback, const PolicyContext& ctx) {
  const auto m = static_cast<std::size_t>(lookback);
  if (lookback < 1 || history.size() < m + 1) {
    throw Error("predict_state: history shorter than lookback + 1");
  }
  const std::size_t first = history.size() - 1 - m;
  const TerrainParams terrain = dyn.apply(ctx.model_terrain);
  VehicleState s = history[first].state;
  for (std::size_t j = first; j + 1 < history.size(); ++j) {
    const HistoryEntry& e = history[j];
    if (!e.has_action) throw Error("predict_state: missing applied action");
    s = step(s, e.action, history[j + 1].t - e.t, ctx.vehicle, terrain, ctx.model);
  }
  return s;
}

double prediction_fitness(const VehicleState& predicted, const VehicleState& measured,
                          const std::array<double, 6>& w_s) {
  const auto p = predicted.to_array();
  const auto m = measured.to_array();
  double q = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double r = j == 4 ? wrap_angle(m[j] - p[j]) : m[j] - p[j];
    q += w_s[j] * r * r;
  }
  return q;
}

Action policy_action(const CtrlChromosome& ctrl, const PolicyFeatures& features,
                     const VehicleParams& vehicle) {
  const std::array<double, 3> f{features.alpha, features.speed_error, features.slope};
  double out[2] = {0.0, 0.0};
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) out[r] += ctrl.gain(r, c) * f[c];
  }
  return Action::clamped(out[0], out[1], vehicle);
}

std::vector<VehicleState> rollout_tracking(const CtrlChromosome& ctrl,
                                           const DynChromosome& dyn_best,
                                           const VehicleState& start, const PolicyContext& ctx,
                                           int horizon) {
  const TerrainParams terrain = dyn_best.apply(ctx.model_terrain);
  std::vector<VehicleState> trace;
  trace.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  VehicleState s = start;
  for (int j = 0; j < horizon; ++j) {
    const Action a = policy_action(ctrl, compute_features(s, ctx), ctx.vehicle);
    s = step(s, a, ctx.dt, ctx.vehicle, terrain, ctx.model);
    trace.push_back(s);
  }
  return trace;
}

double control_fitness(std::span<const VehicleState> trace,
                       std::span<const ReferenceState> references, const CtrlChromosome& ctrl,
                       const std::array<double, 6>& w_r, const std::array<double, 6>& w_k) {
  if (trace.size() != references.size()) {
    throw Error("control_fitness: trace and references differ in length");
  }
  double c = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto s = trace[i].to_array();
    const auto r = as_vector(references[i]);
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double e = j == 4 ? wrap_angle(r[j] - s[j]) : r[j] - s[j];
      c += w_r[j] * e * e;
    }
  }
  for (std::size_t j = 0; j < ctrl.genes.size(); ++j) c += w_k[j] * ctrl.genes[j] * ctrl.genes[j];
  return c;
}

std::size_t sample_rank(std::size_t population_size, std::mt19937_64& rng) {
  if (population_size <= 1) return 0;
  std::normal_distribution<double> unit(0.0, 1.0);
  const double sigma = static_cast<double>(population_size) / 3.0;
  const double idx = std::floor(std::abs(unit(rng)) * sigma);
  return std::min(static_cast<std::size_t>(idx), population_size - 1);
}

std::pair<std::size_t, std::size_t> select_parents(std::size_t population_size,
                                                   std::mt19937_64& rng) {
  const std::size_t a = sample_rank(population_size, rng);
  const std::size_t b = sample_rank(population_size, rng);
  return {a, b};
}

InjectionResult fit_inverse_model(std::span<const PolicyFeatures> features,
                                  std::span<const Action> actions, double ridge_lambda,
                                  const GeneBounds<6>& bounds) {
  if (features.size() != actions.size() || features.empty()) {
    throw Error("fit_inverse_model: need matching, non-empty feature and action rows");
  }
  const auto rows = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd f(rows, 3);
  Eigen::MatrixXd a(rows, 2);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& fi = features[static_cast<std::size_t>(i)];
    const auto& ai = actions[static_cast<std::size_t>(i)];
    f.row(i) << fi.alpha, fi.speed_error, fi.slope;
    a.row(i) << ai.phi, ai.omega_w;
  }

  InjectionResult out;
  Eigen::MatrixXd x;  // 3x2, K transposed
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(f);
  cod.setThreshold(1e-10);
  if (cod.rank() == 3) {
    x = cod.solve(a);
  } else {
    out.rank_deficient = true;
    const Eigen::MatrixXd normal =
        f.transpose() * f + ridge_lambda * Eigen::MatrixXd::Identity(3, 3);
    x = normal.ldlt().solve(f.transpose() * a);
  }
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t g = r * 3 + c;
      const double v = x(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r));
      out.member.genes[g] = std::isfinite(v) ? std::clamp(v, bounds.lower[g], bounds.upper[g]) : 0.0;
    }
  }
  return out;
}

InjectionResult inject_inverse_model(const HistoryBuffer& history, int horizon,
                                     double ridge_lambda, const GeneBounds<6>& bounds) {
  std::vector<PolicyFeatures> features;
  std::vector<Action> actions;
  for (std::size_t i = history.size(); i-- > 0 && features.size() < static_cast<std::size_t>(horizon);) {
    const HistoryEntry& e = history[i];
    if (!e.has_action) continue;
    features.push_back(e.features);
    actions.push_back(e.action);
  }
  if (horizon < 1 || features.size() < static_cast<std::size_t>(horizon)) {
    throw Error("inject_inverse_model: not enough history");
  }
  std::reverse(features.begin(), features.end());
  std::reverse(actions.begin(), actions.end());
  return fit_inverse_model(features, actions, ridge_lambda, bounds);
}

std::vector<std::size_t> rank_order(std::span<const double> fitness) {
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  return order;
}

Gate::Gate(double q_threshold, double c_threshold, int window)
    : q_threshold_(q_threshold), c_threshold_(c_threshold), window_(window) {}

ControllerMode Gate::update(double best_q, double best_c) {
  if (mode_ == ControllerMode::kLearned) return mode_;
  if (best_q < q_threshold_ && best_c < c_threshold_) {
    ++consecutive_;
  } else {
    consecutive_ = 0;
  }
  if (consecutive_ >= window_) mode_ = ControllerMode::kLearned;
  return mode_;
}

CoevolutionLearner::CoevolutionLearner(GAConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      rng_(seed),
      gate_(cfg_.q_threshold, cfg_.c_threshold, cfg_.gate_window) {
  cfg_.validate();
  for (int i = 0; i < cfg_.dyn_population; ++i) {
    dyn_.push_back(uniform_member<DynChromosome>(cfg_.dyn_bounds, rng_));
  }
  for (int i = 0; i < cfg_.ctrl_population; ++i) {
    ctrl_.push_back(uniform_member<CtrlChromosome>(cfg_.ctrl_bounds, rng_));
  }
  dyn_fit_.assign(dyn_.size(), kWorstFitness);
  ctrl_fit_.assign(ctrl_.size(), kWorstFitness);
}

void CoevolutionLearner::evaluate_dynamics(const HistoryBuffer& history, const PolicyContext& ctx) {
  const auto m = static_cast<std::size_t>(cfg_.prediction_lookback);
  dyn_fit_.assign(dyn_.size(), kWorstFitness);
  if (history.size() < m + 1) return;
  const VehicleState& measured = history.back().state;
  for (std::size_t i = 0; i < dyn_.size(); ++i) {
    try {
      dyn_fit_[i] = prediction_fitness(
          predict_state(dyn_[i], history, cfg_.prediction_lookback, ctx), measured, cfg_.w_s);
    } catch (const NonFiniteError&) {
      dyn_fit_[i] = kWorstFitness;
    }
    if (!std::isfinite(dyn_fit_[i])) dyn_fit_[i] = kWorstFitness;
  }
  sort_by_fitness(dyn_, dyn_fit_);
}

void CoevolutionLearner::evaluate_control(const HistoryBuffer& history, const PolicyContext& ctx,
                                          const DynChromosome& model) {
  ctrl_fit_.assign(ctrl_.size(), kWorstFitness);
  if (history.empty()) return;
  const VehicleState& start = history.back().state;
  const auto refs =
      reference_states(*ctx.track, {start.x, start.y, start.psi}, cfg_.tracking_horizon, ctx.dt);
  for (std::size_t i = 0; i < ctrl_.size(); ++i) {
    try {
      const auto trace = rollout_tracking(ctrl_[i], model, start, ctx, cfg_.tracking_horizon);
      ctrl_fit_[i] = control_fitness(trace, refs, ctrl_[i], cfg_.w_r, cfg_.w_k);
    } catch (const NonFiniteError&) {
      ctrl_fit_[i] = kWorstFitness;
    }
    if (!std::isfinite(ctrl_fit_[i])) ctrl_fit_[i] = kWorstFitness;
  }
  sort_by_fitness(ctrl_, ctrl_fit_);
}

CoevolutionLearner::Evaluation CoevolutionLearner::evaluate(const HistoryBuffer& history,
                                                            const PolicyContext& ctx) {
  Evaluation out;
  evaluate_dynamics(history, ctx);
  out.q_evaluated = history.size() >= static_cast<std::size_t>(cfg_.prediction_lookback) + 1;
  out.best_dyn = dyn_.front();
  out.best_q = dyn_fit_.front();

  evaluate_control(history, ctx, out.best_dyn);
  out.c_evaluated = !history.empty();
  out.best_ctrl = ctrl_.front();
  out.best_c = ctrl_fit_.front();

  out.mode = gate_.update(out.best_q, out.best_c);
  return out;
}

void CoevolutionLearner::evolve(const HistoryBuffer& history) {
  const EvolutionParams params{cfg_.breeders, cfg_.injected, cfg_.crossover_rate};
  dyn_ = evolve_generation(dyn_, params, cfg_.dyn_mutation_scales(), cfg_.dyn_bounds, rng_,
                           [&] { return uniform_member<DynChromosome>(cfg_.dyn_bounds, rng_); });

  std::size_t with_action = 0;
  for (std::size_t i = 0; i < history.size(); ++i) with_action += history[i].has_action ? 1 : 0;
  const bool can_inject = with_action >= static_cast<std::size_t>(cfg_.injection_horizon);
  ctrl_ = evolve_generation(ctrl_, params, cfg_.ctrl_mutation_scales(), cfg_.ctrl_bounds, rng_, [&] {
    if (!can_inject) return uniform_member<CtrlChromosome>(cfg_.ctrl_bounds, rng_);
    const InjectionResult r = inject_inverse_model(history, cfg_.injection_horizon,
                                                   cfg_.ridge_lambda, cfg_.ctrl_bounds);
    if (r.rank_deficient) ++rank_deficient_;
    return r.member;
  });

  dyn_fit_.assign(dyn_.size(), kWorstFitness);
  ctrl_fit_.assign(ctrl_.size(), kWorstFitness);
  ++generation_;
}

}  // namespace terraga
