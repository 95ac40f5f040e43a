#pragma once

#include <array>

#include "terraga/angles.hpp"

namespace terraga {

// Planar 3-DOF model of a two-wheel (bicycle) car on an inclined plane.
// All vectors live in the slope-aligned inertial frame: x points downslope,
// y lies across the slope, and the plane normal is implicit.

struct VehicleParams {
  double mass = 1.0;             // kg
  double wheel_radius = 0.10;    // m
  double rear_offset = 0.16;     // m, cm to rear contact point along -b1
  double front_offset = 0.16;    // m, cm to front contact point along +b1
  double yaw_inertia = 0.01;     // kg m^2
  double steering_limit = deg2rad(30.0);  // rad
  double wheel_speed_limit = 50.0;        // rad/s

  double wheelbase() const { return rear_offset + front_offset; }
  /// Throws ConfigError on a non-physical parameter set.
  void validate() const;
};

struct TerrainParams {
  double mu_s = 5.0;               // lateral slip friction
  double mu_w = 1.0;               // forward slip friction
  double slope = deg2rad(30.0);    // rad
  double gravity = 9.81;           // m/s^2

  void validate() const;
};

/// Smoothing and integration settings shared by the truth simulation and
/// every candidate-model rollout.
struct ModelSettings {
  double sign_epsilon = 0.05;  // m/s, width of the tanh sign
  bool exact_sign = false;     // use the discontinuous sign instead
  double max_substep = 2e-4;   // s, RK4 substep upper bound

  void validate() const;
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double psi = 0.0;
  double psi_dot = 0.0;

  static constexpr std::size_t kSize = 6;
  std::array<double, kSize> to_array() const { return {x, y, vx, vy, psi, psi_dot}; }
  static VehicleState from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }

  /// Speed along the body forward axis b1.
  double forward_speed() const;
  bool is_finite() const;

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct Action {
  double phi = 0.0;      // rad, front-wheel steering angle
  double omega_w = 0.0;  // rad/s, wheel rotation rate

  /// Builds an action clamped to the actuator limits of `params`.
  static Action clamped(double phi, double omega_w, const VehicleParams& params);

  friend bool operator==(const Action&, const Action&) = default;
};

struct NormalForces {
  double rear = 0.0;   // N at contact point p
  double front = 0.0;  // N at contact point c
};

struct SlipVelocities {
  double rear_long = 0.0;   // along b1
  double rear_lat = 0.0;    // along b2
  double front_long = 0.0;  // along w1
  double front_lat = 0.0;   // along w2
};

struct ContactForces {
  double f_p_n = 0.0, f_c_n = 0.0;
  double f_p_b1 = 0.0, f_p_b2 = 0.0;
  double f_c_w1 = 0.0, f_c_w2 = 0.0;
};

struct ForceMoment {
  double fx = 0.0;
  double fy = 0.0;
  double moment = 0.0;  // about the plane normal
};

using StateDerivative = std::array<double, VehicleState::kSize>;

/// Quasi-static normal loads with the center of mass in the contact plane.
NormalForces normal_forces(const VehicleParams& params, const TerrainParams& terrain);

SlipVelocities slip_velocities(const VehicleState& state, const Action& action,
                               const VehicleParams& params);

/// mu * (slip + normal * sgn(slip)). The caller applies the direction.
double friction_force(double slip, double normal, double mu,
                      const ModelSettings& settings = {});

ContactForces contact_forces(const VehicleState& state, const Action& action,
                             const VehicleParams& params, const TerrainParams& terrain,
                             const ModelSettings& settings = {});

ForceMoment net_force_moment(const VehicleState& state, const Action& action,
                             const VehicleParams& params, const TerrainParams& terrain,
                             const ModelSettings& settings = {});

StateDerivative state_derivative(const VehicleState& state, const Action& action,
                                 const VehicleParams& params, const TerrainParams& terrain,
                                 const ModelSettings& settings = {});

/// Advances the state by `dt` with fixed-step RK4, holding `action` constant.
/// Throws NonFiniteError if the result is not finite.
VehicleState step(const VehicleState& state, const Action& action, double dt,
                  const VehicleParams& params, const TerrainParams& terrain,
                  const ModelSettings& settings = {});

double kinetic_energy(const VehicleState& state, const VehicleParams& params);

}  // namespace terraga
