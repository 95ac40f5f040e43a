#include "terraga/vehicle_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "terraga/errors.hpp"

namespace terraga {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}

double sign_of(double v, const ModelSettings& settings) {
  if (settings.exact_sign) return static_cast<double>((v > 0.0) - (v < 0.0));
  return std::tanh(v / settings.sign_epsilon);
}

// Everything that stays constant over one control period, so the RK4 inner
// loop only pays for the heading-dependent trigonometry.
struct Kernel {
  const VehicleParams& params;
  const ModelSettings& settings;
  double mu_s, mu_w;
  double n_rear, n_front;
  double gravity_x;
  double rw_omega;
  double cos_phi, sin_phi;

  Kernel(const Action& action, const VehicleParams& p, const TerrainParams& terrain,
         const ModelSettings& s)
      : params(p), settings(s), mu_s(terrain.mu_s), mu_w(terrain.mu_w) {
    const NormalForces n = normal_forces(p, terrain);
    n_rear = n.rear;
    n_front = n.front;
    gravity_x = p.mass * terrain.gravity * std::sin(terrain.slope);
    rw_omega = p.wheel_radius * action.omega_w;
    cos_phi = std::cos(action.phi);
    sin_phi = std::sin(action.phi);
  }

  double law(double slip, double normal, double mu) const {
    return mu * (slip + normal * sign_of(slip, settings));
  }

  SlipVelocities slips(const VehicleState& s, double c, double sn) const {
    // Steered wheel axes: w1 = R(psi + phi) e1, w2 = R(psi + phi) e2.
    const double cw = c * cos_phi - sn * sin_phi;
    const double sw = sn * cos_phi + c * sin_phi;
    const double v_b1 = s.vx * c + s.vy * sn;
    const double v_b2 = -s.vx * sn + s.vy * c;
    const double v_w1 = s.vx * cw + s.vy * sw;
    const double v_w2 = -s.vx * sw + s.vy * cw;
    // Contact-point velocity: v_cm + psi_dot x r. With r = -d_r b1 (rear) and
    // r = +d_f b1 (front), the rotational part is -/+ d psi_dot b2;
    // b2 . w1 = sin(phi) and b2 . w2 = cos(phi).
    const double d_r = params.rear_offset;
    const double d_f = params.front_offset;
    SlipVelocities out;
    out.rear_long = rw_omega - v_b1;
    out.rear_lat = v_b2 - d_r * s.psi_dot;
    out.front_long = rw_omega - (v_w1 + d_f * s.psi_dot * sin_phi);
    out.front_lat = v_w2 + d_f * s.psi_dot * cos_phi;
    return out;
  }

  ContactForces forces(const SlipVelocities& slip) const {
    ContactForces f;
    f.f_p_n = n_rear;
    f.f_c_n = n_front;
    f.f_p_b1 = law(slip.rear_long, n_rear, mu_w);
    f.f_p_b2 = -law(slip.rear_lat, n_rear, mu_s);
    f.f_c_w1 = law(slip.front_long, n_front, mu_w);
    f.f_c_w2 = -law(slip.front_lat, n_front, mu_s);
    return f;
  }

  ForceMoment resultant(const ContactForces& f, double c, double sn) const {
    const double cw = c * cos_phi - sn * sin_phi;
    const double sw = sn * cos_phi + c * sin_phi;
    ForceMoment out;
    out.fx = f.f_p_b1 * c - f.f_p_b2 * sn + f.f_c_w1 * cw - f.f_c_w2 * sw + gravity_x;
    out.fy = f.f_p_b1 * sn + f.f_p_b2 * c + f.f_c_w1 * sw + f.f_c_w2 * cw;
    // r x F about the normal reduces to -d_r (F_p . b2) + d_f (F_c . b2).
    const double fc_b2 = f.f_c_w1 * sin_phi + f.f_c_w2 * cos_phi;
    out.moment = -params.rear_offset * f.f_p_b2 + params.front_offset * fc_b2;
    return out;
  }

  StateDerivative derivative(const VehicleState& s) const {
    const double c = std::cos(s.psi);
    const double sn = std::sin(s.psi);
    const ForceMoment fm = resultant(forces(slips(s, c, sn)), c, sn);
    return {s.vx, s.vy, fm.fx / params.mass, fm.fy / params.mass, s.psi_dot,
            fm.moment / params.yaw_inertia};
  }
};

using Vec6 = StateDerivative;

Vec6 axpy(const Vec6& x, double a, const Vec6& d) {
  Vec6 out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + a * d[i];
  return out;
}

}  // namespace

void VehicleParams::validate() const {
  require(mass > 0.0 && std::isfinite(mass), "vehicle.mass must be positive");
  require(wheel_radius > 0.0 && std::isfinite(wheel_radius), "vehicle.wheel_radius must be positive");
  require(rear_offset > 0.0 && std::isfinite(rear_offset), "vehicle.rear_offset must be positive");
  require(front_offset > 0.0 && std::isfinite(front_offset), "vehicle.front_offset must be positive");
  require(yaw_inertia > 0.0 && std::isfinite(yaw_inertia), "vehicle.yaw_inertia must be positive");
  require(steering_limit > 0.0 && std::isfinite(steering_limit), "vehicle.steering_limit must be positive and finite");
  require(wheel_speed_limit > 0.0 && std::isfinite(wheel_speed_limit),
          "vehicle.wheel_speed_limit must be positive and finite");
}

void TerrainParams::validate() const {
  require(mu_s >= 0.0 && std::isfinite(mu_s), "terrain.mu_s must be >= 0");
  require(mu_w >= 0.0 && std::isfinite(mu_w), "terrain.mu_w must be >= 0");
  require(slope >= 0.0 && slope < kPi / 2.0, "terrain.slope must lie in [0, pi/2)");
  require(gravity > 0.0 && std::isfinite(gravity), "terrain.gravity must be positive");
}

void ModelSettings::validate() const {
  require(sign_epsilon > 0.0 && std::isfinite(sign_epsilon), "model.sign_epsilon must be positive");
  require(max_substep > 0.0 && std::isfinite(max_substep), "model.max_substep must be positive");
}

double VehicleState::forward_speed() const {
  return vx * std::cos(psi) + vy * std::sin(psi);
}

bool VehicleState::is_finite() const {
  for (double v : to_array()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Action Action::clamped(double phi, double omega_w, const VehicleParams& params) {
  return {std::clamp(phi, -params.steering_limit, params.steering_limit),
          std::clamp(omega_w, -params.wheel_speed_limit, params.wheel_speed_limit)};
}

NormalForces normal_forces(const VehicleParams& params, const TerrainParams& terrain) {
  const double total = params.mass * terrain.gravity * std::cos(terrain.slope);
  const double wheelbase = params.wheelbase();
  // f_p d_r = f_c d_f and f_p + f_c = total.
  return {total * params.front_offset / wheelbase, total * params.rear_offset / wheelbase};
}

SlipVelocities slip_velocities(const VehicleState& state, const Action& action,
                               const VehicleParams& params) {
  const TerrainParams flat{0.0, 0.0, 0.0, 9.81};
  const ModelSettings settings;
  const Kernel k(action, params, flat, settings);
  return k.slips(state, std::cos(state.psi), std::sin(state.psi));
}

double friction_force(double slip, double normal, double mu, const ModelSettings& settings) {
  return mu * (slip + normal * sign_of(slip, settings));
}

ContactForces contact_forces(const VehicleState& state, const Action& action,
                             const VehicleParams& params, const TerrainParams& terrain,
                             const ModelSettings& settings) {
  const Kernel k(action, params, terrain, settings);
  return k.forces(k.slips(state, std::cos(state.psi), std::sin(state.psi)));
}

ForceMoment net_force_moment(const VehicleState& state, const Action& action,
                             const VehicleParams& params, const TerrainParams& terrain,
                             const ModelSettings& settings) {
  const Kernel k(action, params, terrain, settings);
  const double c = std::cos(state.psi);
  const double sn = std::sin(state.psi);
  return k.resultant(k.forces(k.slips(state, c, sn)), c, sn);
}

StateDerivative state_derivative(const VehicleState& state, const Action& action,
                                 const VehicleParams& params, const TerrainParams& terrain,
                                 const ModelSettings& settings) {
  return Kernel(action, params, terrain, settings).derivative(state);
}

VehicleState step(const VehicleState& state, const Action& action, double dt,
                  const VehicleParams& params, const TerrainParams& terrain,
                  const ModelSettings& settings) {
  if (!(dt > 0.0)) throw Error("step: dt must be positive");
  const Kernel k(action, params, terrain, settings);
  const auto substeps = static_cast<int>(std::ceil(dt / settings.max_substep - 1e-9));
  const double h = dt / substeps;

  Vec6 s = state.to_array();
  for (int i = 0; i < substeps; ++i) {
    const Vec6 k1 = k.derivative(VehicleState::from_array(s));
    const Vec6 k2 = k.derivative(VehicleState::from_array(axpy(s, 0.5 * h, k1)));
    const Vec6 k3 = k.derivative(VehicleState::from_array(axpy(s, 0.5 * h, k2)));
    const Vec6 k4 = k.derivative(VehicleState::from_array(axpy(s, h, k3)));
    for (std::size_t j = 0; j < s.size(); ++j) {
      s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
  }
  VehicleState out = VehicleState::from_array(s);
  if (!out.is_finite()) throw NonFiniteError("step: state diverged");
  out.psi = wrap_angle(out.psi);
  return out;
}

double kinetic_energy(const VehicleState& state, const VehicleParams& params) {
  return 0.5 * params.mass * (state.vx * state.vx + state.vy * state.vy) +
         0.5 * params.yaw_inertia * state.psi_dot * state.psi_dot;
}

}  // namespace terraga
