#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "terraga/track.hpp"
#include "terraga/vehicle_dynamics.hpp"

namespace terraga {

// Co-evolution of a friction-parameter population (dynamics model) and a
// gain-matrix population (control policy), both scored against the rolling
// measurement history. Lower fitness is fitter in both populations.

inline constexpr double kWorstFitness = std::numeric_limits<double>::infinity();

template <std::size_t N>
struct Chromosome {
  static constexpr std::size_t kGenes = N;
  std::array<double, N> genes{};

  friend bool operator==(const Chromosome&, const Chromosome&) = default;
};

/// [mu_s, mu_w]
struct DynChromosome : Chromosome<2> {
  double mu_s() const { return genes[0]; }
  double mu_w() const { return genes[1]; }
  /// `base` with the candidate friction coefficients substituted.
  TerrainParams apply(TerrainParams base) const {
    base.mu_s = mu_s();
    base.mu_w = mu_w();
    return base;
  }
};

/// Row-major 2x3 gain matrix mapping [alpha, dV, slope] to [phi, omega_w].
struct CtrlChromosome : Chromosome<6> {
  double gain(std::size_t row, std::size_t col) const { return genes[row * 3 + col]; }
};

template <std::size_t N>
struct GeneBounds {
  std::array<double, N> lower{};
  std::array<double, N> upper{};
};

struct GAConfig {
  int prediction_lookback = 1;  // control steps propagated for Q
  int tracking_horizon = 2;     // control steps rolled out for C
  double crossover_rate = 0.67;
  int dyn_population = 8;
  int ctrl_population = 8;
  int breeders = 3;  // elites copied unchanged
  int injected = 1;  // fresh members per generation
  std::array<double, 6> w_s{1e3, 1e3, 0.0, 0.0, 180.0 / kPi, 0.0};
  std::array<double, 6> w_r{1.0, 1.0, 0.01, 0.0, 0.0, 0.0};
  std::array<double, 6> w_k{0.0, 1e-7, 0.0, 0.0, 0.0, 1e-7};
  GeneBounds<2> dyn_bounds{{0.0, 0.0}, {20.0, 4.0}};
  GeneBounds<6> ctrl_bounds{{-50.0, -50.0, -50.0, -50.0, -50.0, -50.0},
                            {50.0, 50.0, 50.0, 50.0, 50.0, 50.0}};
  double mutation_fraction = 0.02;  // sigma as a fraction of each bound range
  int injection_horizon = 10;
  double ridge_lambda = 1e-6;
  double q_threshold = 0.05;
  double c_threshold = 0.1;
  int gate_window = 25;

  std::array<double, 2> dyn_mutation_scales() const;
  std::array<double, 6> ctrl_mutation_scales() const;
  void validate() const;
};

struct PolicyFeatures {
  double alpha = 0.0;        // path intersection angle, rad
  double speed_error = 0.0;  // V_d - V . b1, m/s
  double slope = 0.0;        // slope estimate, rad
};

/// Everything a candidate rollout needs besides the chromosomes.
struct PolicyContext {
  const Track* track = nullptr;
  double lookahead = 0.5;        // m, for the intersection angle
  double slope_estimate = 0.0;   // rad, fed to the policy
  double dt = 0.2;               // control period, s
  VehicleParams vehicle;
  TerrainParams model_terrain;   // slope and gravity used by the internal model
  ModelSettings model;
};

PolicyFeatures compute_features(const VehicleState& state, const PolicyContext& ctx);

struct HistoryEntry {
  double t = 0.0;
  VehicleState state;  // measured (estimated) state
  Action action;       // action applied from this step on
  bool has_action = false;
  ReferenceState reference;
  PolicyFeatures features;
};

/// Chronological ring buffer of the most recent control steps.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(std::size_t capacity);

  void push(const HistoryEntry& entry);
  void set_last_action(const Action& action);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  /// Oldest first.
  const HistoryEntry& operator[](std::size_t i) const { return entries_[i]; }
  const HistoryEntry& back() const { return entries_.back(); }

 private:
  std::size_t capacity_;
  std::deque<HistoryEntry> entries_;
};

/// Propagates the state measured `lookback` steps ago through the actions
/// actually applied since, under the candidate friction coefficients.
/// Throws NonFiniteError on divergence.
VehicleState predict_state(const DynChromosome& dyn, const HistoryBuffer& history,
                           int lookback, const PolicyContext& ctx);

double prediction_fitness(const VehicleState& predicted, const VehicleState& measured,
                          const std::array<double, 6>& w_s);

Action policy_action(const CtrlChromosome& ctrl, const PolicyFeatures& features,
                     const VehicleParams& vehicle);

/// Closed-loop rollout of `horizon` control periods under `dyn_best`.
/// Returns the states after each period. Throws NonFiniteError on divergence.
std::vector<VehicleState> rollout_tracking(const CtrlChromosome& ctrl,
                                           const DynChromosome& dyn_best,
                                           const VehicleState& start, const PolicyContext& ctx,
                                           int horizon);

/// Sum over the horizon of w_r-weighted squared reference errors plus a
/// single w_k-weighted squared gain penalty.
double control_fitness(std::span<const VehicleState> trace,
                       std::span<const ReferenceState> references, const CtrlChromosome& ctrl,
                       const std::array<double, 6>& w_r, const std::array<double, 6>& w_k);

/// Rank index from a half-normal draw: floor(|N(0,1)| * size / 3), clamped.
std::size_t sample_rank(std::size_t population_size, std::mt19937_64& rng);
std::pair<std::size_t, std::size_t> select_parents(std::size_t population_size,
                                                   std::mt19937_64& rng);

/// Per gene: parent_b's gene with probability `rate`, else parent_a's.
template <class C>
C crossover(const C& parent_a, const C& parent_b, double rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  C child = parent_a;
  for (std::size_t i = 0; i < C::kGenes; ++i) {
    if (u(rng) < rate) child.genes[i] = parent_b.genes[i];
  }
  return child;
}

/// Adds N(0, scale_i) to each gene, then clamps into the bounds.
template <class C>
C mutate(const C& child, const std::array<double, C::kGenes>& scales,
         const GeneBounds<C::kGenes>& bounds, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  C out = child;
  for (std::size_t i = 0; i < C::kGenes; ++i) {
    out.genes[i] = std::clamp(out.genes[i] + scales[i] * unit(rng), bounds.lower[i],
                              bounds.upper[i]);
  }
  return out;
}

template <class C>
C uniform_member(const GeneBounds<C::kGenes>& bounds, std::mt19937_64& rng) {
  C out;
  for (std::size_t i = 0; i < C::kGenes; ++i) {
    std::uniform_real_distribution<double> u(bounds.lower[i], bounds.upper[i]);
    out.genes[i] = u(rng);
  }
  return out;
}

struct InjectionResult {
  CtrlChromosome member;
  bool rank_deficient = false;
};

/// Least-squares gain matrix mapping feature rows to action rows: the
/// pseudo-inverse solution, or a ridge solve when the features are
/// collinear. Gains are clamped into `bounds`.
InjectionResult fit_inverse_model(std::span<const PolicyFeatures> features,
                                  std::span<const Action> actions, double ridge_lambda,
                                  const GeneBounds<6>& bounds);

/// fit_inverse_model over the newest `horizon` entries that carry an action.
/// Throws Error when fewer are available.
InjectionResult inject_inverse_model(const HistoryBuffer& history, int horizon,
                                     double ridge_lambda, const GeneBounds<6>& bounds);

/// Permutation sorting `fitness` ascending; ties keep their original order.
std::vector<std::size_t> rank_order(std::span<const double> fitness);

struct EvolutionParams {
  int breeders = 3;
  int injected = 1;
  double crossover_rate = 0.67;
};

/// Builds the next generation from a population sorted fittest-first: the
/// top `breeders` survive, mutated crossover children fill the middle and
/// `inject()` supplies the last `injected` members.
template <class C, class Inject>
std::vector<C> evolve_generation(const std::vector<C>& ranked, const EvolutionParams& params,
                                 const std::array<double, C::kGenes>& mutation_scales,
                                 const GeneBounds<C::kGenes>& bounds, std::mt19937_64& rng,
                                 Inject&& inject) {
  const auto size = ranked.size();
  const auto elites = std::min<std::size_t>(static_cast<std::size_t>(params.breeders), size);
  const auto fresh = std::min<std::size_t>(static_cast<std::size_t>(params.injected), size - elites);
  std::vector<C> next(ranked.begin(), ranked.begin() + static_cast<long>(elites));
  next.reserve(size);
  while (next.size() < size - fresh) {
    const auto [a, b] = select_parents(size, rng);
    next.push_back(mutate(crossover(ranked[a], ranked[b], params.crossover_rate, rng),
                          mutation_scales, bounds, rng));
  }
  while (next.size() < size) next.push_back(inject());
  return next;
}

enum class ControllerMode { kBaseline, kLearned };

/// Hands control to the learned policy once both best fitnesses stay under
/// their thresholds for `window` consecutive steps. Latches.
class Gate {
 public:
  Gate(double q_threshold, double c_threshold, int window);

  ControllerMode update(double best_q, double best_c);
  ControllerMode mode() const { return mode_; }
  int consecutive() const { return consecutive_; }

 private:
  double q_threshold_;
  double c_threshold_;
  int window_;
  int consecutive_ = 0;
  ControllerMode mode_ = ControllerMode::kBaseline;
};

/// One learner per run. Each control step: evaluate() scores both
/// populations on the newest history, then evolve() breeds the next
/// generation once the applied action has been recorded.
class CoevolutionLearner {
 public:
  CoevolutionLearner(GAConfig cfg, std::uint64_t seed);

  struct Evaluation {
    DynChromosome best_dyn;
    double best_q = kWorstFitness;
    CtrlChromosome best_ctrl;
    double best_c = kWorstFitness;
    ControllerMode mode = ControllerMode::kBaseline;
    bool q_evaluated = false;
    bool c_evaluated = false;
  };

  Evaluation evaluate(const HistoryBuffer& history, const PolicyContext& ctx);

  /// Scores the dynamics population only and sorts it.
  void evaluate_dynamics(const HistoryBuffer& history, const PolicyContext& ctx);
  /// Scores and sorts the control population under a given model.
  void evaluate_control(const HistoryBuffer& history, const PolicyContext& ctx,
                        const DynChromosome& model);

  void evolve(const HistoryBuffer& history);

  const GAConfig& config() const { return cfg_; }
  const std::vector<DynChromosome>& dyn_population() const { return dyn_; }
  const std::vector<CtrlChromosome>& ctrl_population() const { return ctrl_; }
  const std::vector<double>& dyn_fitness() const { return dyn_fit_; }
  const std::vector<double>& ctrl_fitness() const { return ctrl_fit_; }
  const Gate& gate() const { return gate_; }
  std::size_t generation() const { return generation_; }
  std::size_t rank_deficient_injections() const { return rank_deficient_; }

 private:
  GAConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<DynChromosome> dyn_;
  std::vector<CtrlChromosome> ctrl_;
  std::vector<double> dyn_fit_;
  std::vector<double> ctrl_fit_;
  Gate gate_;
  std::size_t generation_ = 0;
  std::size_t rank_deficient_ = 0;
};

}  // namespace terraga
