#pragma once

#include <optional>
#include <random>

#include "terraga/vehicle_dynamics.hpp"

namespace terraga {

struct Measurement {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

struct NoiseModel {
  double sigma_pos = 1.3e-4;   // m, per axis
  double sigma_rot = 0.83e-4;  // rad
  double sigma_slope = 0.0;    // rad, noise on the slope handed to controllers

  void validate() const;
};

/// Pose measurement with independent zero-mean Gaussian noise on x, y, psi.
/// Draw order is x, y, psi.
Measurement corrupt(const VehicleState& truth, double t, std::mt19937_64& rng,
                    const NoiseModel& noise);

struct EstimatorConfig {
  double velocity_beta = 0.5;  // weight of the newest finite difference
  double pose_beta = 1.0;      // weight of the newest pose; 1 passes it through

  void validate() const;
};

/// Reconstructs the full planar state from pose-only measurements by
/// low-passed finite differences. Carries no model information.
class StateEstimator {
 public:
  explicit StateEstimator(EstimatorConfig cfg = {});

  /// Throws NonMonotoneTimeError unless `meas.t` exceeds the previous stamp.
  VehicleState update(const Measurement& meas);

  const std::optional<VehicleState>& estimate() const { return estimate_; }

 private:
  EstimatorConfig cfg_;
  std::optional<VehicleState> estimate_;
  double last_t_ = 0.0;
  int updates_ = 0;
};

}  // namespace terraga
