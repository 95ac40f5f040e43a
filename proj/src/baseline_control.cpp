#include "terraga/baseline_control.hpp"

#include <algorithm>
#include <cmath>

#include "terraga/errors.hpp"

namespace terraga {

void BaselineConfig::validate() const {
  if (!(k_p > 0.0) || !(lookahead > 0.0) || !(wheelbase > 0.0)) {
    throw ConfigError("baseline gains k_p, lookahead and wheelbase must be positive");
  }
}

double velocity_command(double v_desired, double v_forward, const BaselineConfig& cfg,
                        double wheel_speed_limit) {
  return std::clamp(cfg.k_p * (v_desired - v_forward), -wheel_speed_limit, wheel_speed_limit);
}

double pure_pursuit(double alpha, const BaselineConfig& cfg, double steering_limit) {
  const double phi = std::atan(2.0 * cfg.wheelbase * std::sin(alpha) / cfg.lookahead);
  return std::clamp(phi, -steering_limit, steering_limit);
}

Action baseline_action(const VehicleState& estimate, const Track& track,
                       const BaselineConfig& cfg, const VehicleParams& params) {
  const Pose2 pose{estimate.x, estimate.y, estimate.psi};
  const Point2 target = lookahead(track, pose, cfg.lookahead);
  const double alpha = intersection_angle(pose, target);
  return Action::clamped(
      pure_pursuit(alpha, cfg, params.steering_limit),
      velocity_command(track.desired_speed(), estimate.forward_speed(), cfg,
                       params.wheel_speed_limit),
      params);
}

}  // namespace terraga
