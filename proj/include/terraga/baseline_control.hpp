#pragma once

#include "terraga/track.hpp"
#include "terraga/vehicle_dynamics.hpp"

namespace terraga {

// Proportional wheel-speed control plus pure-pursuit steering. Used to drive
// the car coarsely along the track until the learner takes over.

struct BaselineConfig {
  double k_p = 5.0;        // rad/s of wheel command per m/s of speed error
  double lookahead = 0.5;  // m
  double wheelbase = 0.32; // m

  void validate() const;
};

/// k_p * (v_desired - v_forward), clamped to +-wheel_speed_limit.
double velocity_command(double v_desired, double v_forward, const BaselineConfig& cfg,
                        double wheel_speed_limit);

/// atan(2 L sin(alpha) / L_d), clamped to +-steering_limit.
double pure_pursuit(double alpha, const BaselineConfig& cfg, double steering_limit);

Action baseline_action(const VehicleState& estimate, const Track& track,
                       const BaselineConfig& cfg, const VehicleParams& params);

}  // namespace terraga
