#include "terraga/estimation.hpp"

#include <cmath>

#include "terraga/angles.hpp"
#include "terraga/errors.hpp"

namespace terraga {

void NoiseModel::validate() const {
  if (!(sigma_pos >= 0.0) || !(sigma_rot >= 0.0) || !(sigma_slope >= 0.0)) {
    throw ConfigError("noise standard deviations must be >= 0");
  }
}

Measurement corrupt(const VehicleState& truth, double t, std::mt19937_64& rng,
                    const NoiseModel& noise) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const double nx = unit(rng);
  const double ny = unit(rng);
  const double npsi = unit(rng);
  return {t, truth.x + noise.sigma_pos * nx, truth.y + noise.sigma_pos * ny,
          wrap_angle(truth.psi + noise.sigma_rot * npsi)};
}

void EstimatorConfig::validate() const {
  if (!(velocity_beta > 0.0 && velocity_beta <= 1.0) || !(pose_beta > 0.0 && pose_beta <= 1.0)) {
    throw ConfigError("estimator smoothing factors must lie in (0, 1]");
  }
}

StateEstimator::StateEstimator(EstimatorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

VehicleState StateEstimator::update(const Measurement& meas) {
  if (!estimate_) {
    estimate_ = VehicleState{meas.x, meas.y, 0.0, 0.0, meas.psi, 0.0};
    last_t_ = meas.t;
    updates_ = 1;
    return *estimate_;
  }
  if (!(meas.t > last_t_)) throw NonMonotoneTimeError("estimator: timestamps must increase");
  const double dt = meas.t - last_t_;
  const VehicleState prev = *estimate_;

  VehicleState next = prev;
  next.x = prev.x + cfg_.pose_beta * (meas.x - prev.x);
  next.y = prev.y + cfg_.pose_beta * (meas.y - prev.y);
  const double dpsi = wrap_angle(meas.psi - prev.psi);
  next.psi = wrap_angle(prev.psi + cfg_.pose_beta * dpsi);

  const double fd_vx = (next.x - prev.x) / dt;
  const double fd_vy = (next.y - prev.y) / dt;
  const double fd_r = wrap_angle(next.psi - prev.psi) / dt;
  // The first difference seeds the filter; later ones are blended in.
  const double b = updates_ == 1 ? 1.0 : cfg_.velocity_beta;
  next.vx = b * fd_vx + (1.0 - b) * prev.vx;
  next.vy = b * fd_vy + (1.0 - b) * prev.vy;
  next.psi_dot = b * fd_r + (1.0 - b) * prev.psi_dot;

  estimate_ = next;
  last_t_ = meas.t;
  ++updates_;
  return next;
}

}  // namespace terraga
