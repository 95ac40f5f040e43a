#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "terraga/errors.hpp"
#include "terraga/ga_learner.hpp"
#include "terraga/vehicle_dynamics.hpp"

namespace terraga {
namespace {

const VehicleParams kCar;
const TerrainParams kFlatFrictionless{0.0, 0.0, 0.0, 9.81};

TerrainParams flat(double mu_s = 5.0, double mu_w = 1.0) { return {mu_s, mu_w, 0.0, 9.81}; }

// Oracle written with explicit 3-vectors: contact velocity v + w x r, slips
// projected on each wheel's axes, forces rotated back and summed.
struct V3 {
  double x, y, z;
};
V3 cross(V3 a, V3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
double dot(V3 a, V3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
V3 add(V3 a, V3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
V3 scale(V3 a, double k) { return {a.x * k, a.y * k, a.z * k}; }

std::array<double, 6> oracle_derivative(const VehicleState& s, const Action& a, const VehicleParams& p,
                                        const TerrainParams& t, double eps) {
  const auto sgn = [&](double v) { return std::tanh(v / eps); };
  const V3 b1{std::cos(s.psi), std::sin(s.psi), 0}, b2{-std::sin(s.psi), std::cos(s.psi), 0};
  const double q = s.psi + a.phi;
  const V3 w1{std::cos(q), std::sin(q), 0}, w2{-std::sin(q), std::cos(q), 0};
  const V3 v{s.vx, s.vy, 0}, omega{0, 0, s.psi_dot};
  const V3 r_p = scale(b1, -p.rear_offset), r_c = scale(b1, p.front_offset);
  const V3 vp = add(v, cross(omega, r_p)), vc = add(v, cross(omega, r_c));
  const double total = p.mass * t.gravity * std::cos(t.slope);
  // Lever balance about the cm.
  const double np = total * p.front_offset / (p.rear_offset + p.front_offset);
  const double nc = total - np;
  const double wheel = p.wheel_radius * a.omega_w;
  const auto law = [&](double slip, double n, double mu) { return mu * (slip + n * sgn(slip)); };
  const V3 fp = add(scale(b1, law(wheel - dot(vp, b1), np, t.mu_w)),
                    scale(b2, -law(dot(vp, b2), np, t.mu_s)));
  const V3 fc = add(scale(w1, law(wheel - dot(vc, w1), nc, t.mu_w)),
                    scale(w2, -law(dot(vc, w2), nc, t.mu_s)));
  const V3 g{p.mass * t.gravity * std::sin(t.slope), 0, 0};
  const V3 f = add(add(fp, fc), g);
  const double m = cross(r_p, fp).z + cross(r_c, fc).z;
  return {s.vx, s.vy, f.x / p.mass, f.y / p.mass, s.psi_dot, m / p.yaw_inertia};
}

TEST(NormalForces, SymmetricSplitOnFlatGround) {
  const auto n = normal_forces(kCar, flat());
  EXPECT_NEAR(n.rear, 4.905, 1e-12);
  EXPECT_NEAR(n.front, 4.905, 1e-12);
}

TEST(NormalForces, ThirtyDegreeSlope) {
  const auto n = normal_forces(kCar, TerrainParams{});
  // 9.81 cos(30 deg) / 2
  EXPECT_NEAR(n.rear, 4.2479, 1e-4);
  EXPECT_NEAR(n.front, 4.2479, 1e-4);
}

TEST(NormalForces, LeverArmBalance) {
  VehicleParams p;
  p.rear_offset = 0.1;
  p.front_offset = 0.3;
  const auto n = normal_forces(p, flat());
  EXPECT_NEAR(n.rear, 7.3575, 1e-12);
  EXPECT_NEAR(n.front, 2.4525, 1e-12);
  EXPECT_NEAR(n.rear * 0.1, n.front * 0.3, 1e-12);
}

TEST(NormalForces, SumConservedAcrossSlopesAndGeometry) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 1.0), slope(0.0, 1.5);
  for (int i = 0; i < 1000; ++i) {
    VehicleParams p;
    p.mass = 5 * u(rng);
    p.rear_offset = u(rng);
    p.front_offset = u(rng);
    TerrainParams t;
    t.slope = slope(rng);
    const auto n = normal_forces(p, t);
    const double expected = p.mass * t.gravity * std::cos(t.slope);
    EXPECT_LE(std::abs(n.rear + n.front - expected), 1e-12 * expected);
    EXPECT_GE(n.rear, 0.0);
    EXPECT_GE(n.front, 0.0);
  }
}

TEST(SlipVelocities, AtRestNoCommand) {
  const auto s = slip_velocities({}, {}, kCar);
  EXPECT_EQ(s.rear_long, 0.0);
  EXPECT_EQ(s.rear_lat, 0.0);
  EXPECT_EQ(s.front_long, 0.0);
  EXPECT_EQ(s.front_lat, 0.0);
}

TEST(SlipVelocities, SpinningWheelsAtRest) {
  const auto s = slip_velocities({}, {0.0, 2.0}, kCar);
  EXPECT_NEAR(s.rear_long, 0.2, 1e-15);
  EXPECT_NEAR(s.rear_lat, 0.0, 1e-15);
  EXPECT_NEAR(s.front_long, 0.2, 1e-15);
  EXPECT_NEAR(s.front_lat, 0.0, 1e-15);
}

TEST(SlipVelocities, FrontWheelTurnedNinetyDegrees) {
  VehicleState st;
  st.vx = 0.2;
  const auto s = slip_velocities(st, {kPi / 2.0, 2.0}, kCar);
  EXPECT_NEAR(s.rear_long, 0.0, 1e-15);
  EXPECT_NEAR(s.rear_lat, 0.0, 1e-15);
  EXPECT_NEAR(s.front_long, 0.2, 1e-15);
  EXPECT_NEAR(s.front_lat, -0.2, 1e-15);
}

TEST(SlipVelocities, YawRateMovesContactPoints) {
  VehicleState st;
  st.psi_dot = 1.0;  // rear point moves along -b2, front along +b2
  const auto s = slip_velocities(st, {}, kCar);
  EXPECT_NEAR(s.rear_lat, -0.16, 1e-15);
  EXPECT_NEAR(s.front_lat, 0.16, 1e-15);
}

TEST(FrictionForce, ZeroSlip) { EXPECT_EQ(friction_force(0.0, 5.0, 1.0), 0.0); }

TEST(FrictionForce, CoulombPlusViscous) {
  ModelSettings exact;
  exact.exact_sign = true;
  EXPECT_DOUBLE_EQ(friction_force(1.0, 2.0, 1.0, exact), 3.0);
  EXPECT_DOUBLE_EQ(friction_force(-1.0, 2.0, 1.0, exact), -3.0);
  // tanh(1 / 0.05) differs from 1 by ~1e-17.
  EXPECT_NEAR(friction_force(1.0, 2.0, 1.0), 3.0, 1e-12);
  EXPECT_NEAR(friction_force(-1.0, 2.0, 1.0), -3.0, 1e-12);
}

TEST(FrictionForce, OddAndMonotone) {
  double prev = 0.0;
  for (int i = 1; i <= 400; ++i) {
    const double slip = 0.001 * i;
    const double f = friction_force(slip, 4.0, 2.5);
    EXPECT_EQ(friction_force(-slip, 4.0, 2.5), -f);
    EXPECT_GE(f, prev);
    prev = f;
  }
}

TEST(NetForceMoment, EquilibriumOnFlatGround) {
  const auto fm = net_force_moment({}, {}, kCar, flat());
  EXPECT_EQ(fm.fx, 0.0);
  EXPECT_EQ(fm.fy, 0.0);
  EXPECT_EQ(fm.moment, 0.0);
}

TEST(NetForceMoment, FrictionlessGravityPull) {
  TerrainParams t;
  t.mu_s = t.mu_w = 0.0;
  const auto fm = net_force_moment({}, {}, kCar, t);
  EXPECT_NEAR(fm.fx, 4.905, 1e-12);
  EXPECT_EQ(fm.fy, 0.0);
  EXPECT_EQ(fm.moment, 0.0);
}

TEST(NetForceMoment, DriveForceFromBothWheels) {
  ModelSettings exact;
  exact.exact_sign = true;
  const auto fm = net_force_moment({}, {0.0, 2.0}, kCar, flat(), exact);
  EXPECT_NEAR(fm.fx, 2.0 * (0.2 + 4.905), 1e-12);
  EXPECT_NEAR(fm.fy, 0.0, 1e-15);
  EXPECT_NEAR(fm.moment, 0.0, 1e-15);
  // Smoothed sign: tanh(0.2 / 0.05) = 0.99933.
  const auto smooth = net_force_moment({}, {0.0, 2.0}, kCar, flat());
  EXPECT_NEAR(smooth.fx, 2.0 * (0.2 + 4.905 * std::tanh(4.0)), 1e-12);
  EXPECT_NEAR(smooth.fx, 10.21, 0.01);
}

TEST(StateDerivative, RestOnFlatGround) {
  for (double v : state_derivative({}, {}, kCar, flat())) EXPECT_EQ(v, 0.0);
}

TEST(StateDerivative, FrictionlessSlopeAcceleration) {
  TerrainParams t;
  t.mu_s = t.mu_w = 0.0;
  const auto d = state_derivative({}, {}, kCar, t);
  const std::array<double, 6> expected{0, 0, 4.905, 0, 0, 0};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(d[i], expected[i], 1e-12);
}

TEST(StateDerivative, MatchesVectorOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const VehicleState s{u(rng), u(rng), 0.5 * u(rng), 0.5 * u(rng), 3.0 * u(rng), 2.0 * u(rng)};
    const Action a{0.5 * u(rng), 10.0 * u(rng)};
    TerrainParams t{10.0 + 10.0 * u(rng), 2.0 + 2.0 * u(rng), 0.7 + 0.7 * u(rng), 9.81};
    const auto d = state_derivative(s, a, kCar, t);
    const auto o = oracle_derivative(s, a, kCar, t, ModelSettings{}.sign_epsilon);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(d[j], o[j], 1e-9 * (1.0 + std::abs(o[j]))) << "component " << j;
    }
  }
}

TEST(StateDerivative, MirrorSymmetryAboutXAxis) {
  // Reflection y -> -y flips vy, psi, psi_dot and the steering angle.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const VehicleState s{u(rng), u(rng), u(rng), u(rng), 3.0 * u(rng), u(rng)};
    const Action a{0.5 * u(rng), 5.0 * u(rng)};
    const VehicleState m{s.x, -s.y, s.vx, -s.vy, -s.psi, -s.psi_dot};
    const Action am{-a.phi, a.omega_w};
    const TerrainParams t;
    const auto d = state_derivative(s, a, kCar, t);
    const auto dm = state_derivative(m, am, kCar, t);
    const std::array<double, 6> sign{1, -1, 1, -1, -1, -1};
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(dm[j], sign[j] * d[j], 1e-9);
  }
}

TEST(StateDerivative, CandidateModelPathIsTheTruthPath) {
  const VehicleState s{0.1, -0.2, 0.15, 0.05, 0.7, 0.3};
  const Action a{0.2, 3.0};
  const TerrainParams truth;
  DynChromosome dyn;
  dyn.genes = {truth.mu_s, truth.mu_w};
  const TerrainParams model = dyn.apply(TerrainParams{0.0, 0.0, truth.slope, truth.gravity});
  EXPECT_EQ(state_derivative(s, a, kCar, truth), state_derivative(s, a, kCar, model));
  EXPECT_EQ(step(s, a, 0.2, kCar, truth), step(s, a, 0.2, kCar, model));
}

TEST(Step, RestStaysAtRest) {
  VehicleState s;
  for (int i = 0; i < 100; ++i) {
    const VehicleState next = step(s, {}, 0.2, kCar, flat(20.0, 4.0));
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_LT(std::abs(next.to_array()[j] - s.to_array()[j]), 1e-9);
    }
    s = next;
  }
  EXPECT_EQ(s, VehicleState{});
}

TEST(Step, FrictionlessSlide) {
  TerrainParams t;
  t.mu_s = t.mu_w = 0.0;
  const auto s = step({}, {}, 0.2, kCar, t);
  EXPECT_NEAR(s.vx, 0.981, 1e-6);
  EXPECT_NEAR(s.x, 0.0981, 1e-6);
  EXPECT_NEAR(s.y, 0.0, 1e-12);
}

TEST(Step, InertialCoast) {
  VehicleState s;
  s.vx = 1.0;
  const auto out = step(s, {}, 0.2, kCar, kFlatFrictionless);
  EXPECT_NEAR(out.x, 0.2, 1e-12);
  EXPECT_EQ(out.vx, 1.0);
  EXPECT_EQ(out.vy, 0.0);
}

TEST(Step, HeadingIsWrapped) {
  VehicleState s;
  s.psi = kPi - 0.01;
  s.psi_dot = 1.0;
  const auto out = step(s, {}, 0.2, kCar, kFlatFrictionless);
  EXPECT_LE(out.psi, kPi);
  EXPECT_GT(out.psi, -kPi);
  EXPECT_NEAR(out.psi, -kPi + 0.19, 1e-12);
}

TEST(Step, RejectsNonPositiveDt) {
  EXPECT_THROW(step({}, {}, 0.0, kCar, flat()), Error);
}

TEST(Step, DivergenceRaisesNonFinite) {
  VehicleState s;
  s.vx = std::numeric_limits<double>::infinity();
  EXPECT_THROW(step(s, {}, 0.2, kCar, flat()), NonFiniteError);
}

TEST(Step, PassiveOnFlatGroundWithoutDrive) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    VehicleState s{0, 0, 0.5 * u(rng), 0.5 * u(rng), 3.0 * u(rng), 2.0 * u(rng)};
    const Action a{0.5 * u(rng), 0.0};
    const TerrainParams t = flat(5.0 + 4.0 * u(rng), 1.0 + 0.5 * u(rng));
    double e = kinetic_energy(s, kCar);
    for (int i = 0; i < 50; ++i) {
      s = step(s, a, 0.2, kCar, t);
      const double next = kinetic_energy(s, kCar);
      EXPECT_LE(next, e + 1e-15);
      e = next;
    }
  }
}

TEST(Step, RotationEquivarianceOnFlatGround) {
  const VehicleState base{0.0, 0.0, 0.15, 0.02, 0.0, 0.3};
  const Action a{0.25, 2.5};
  for (double psi0 : {0.4, -1.3, 2.9}) {
    const double c = std::cos(psi0), s = std::sin(psi0);
    VehicleState r{0.0, 0.0, c * base.vx - s * base.vy, s * base.vx + c * base.vy, psi0,
                   base.psi_dot};
    VehicleState b = base;
    for (int i = 0; i < 25; ++i) {
      b = step(b, a, 0.2, kCar, flat());
      r = step(r, a, 0.2, kCar, flat());
    }
    EXPECT_NEAR(r.x, c * b.x - s * b.y, 1e-6);
    EXPECT_NEAR(r.y, s * b.x + c * b.y, 1e-6);
    EXPECT_NEAR(r.vx, c * b.vx - s * b.vy, 1e-6);
    EXPECT_NEAR(r.vy, s * b.vx + c * b.vy, 1e-6);
    EXPECT_NEAR(wrap_angle(r.psi - b.psi - psi0), 0.0, 1e-6);
    EXPECT_NEAR(r.psi_dot, b.psi_dot, 1e-6);
  }
}

double terminal_error(double substep, double reference_substep) {
  const VehicleState s0{0.0, 0.0, 0.1, 0.0, 0.3, 0.0};
  const Action a{0.3, 3.0};
  ModelSettings coarse, fine;
  coarse.max_substep = substep;
  fine.max_substep = reference_substep;
  const auto x = step(s0, a, 0.2, kCar, TerrainParams{}, coarse).to_array();
  const auto r = step(s0, a, 0.2, kCar, TerrainParams{}, fine).to_array();
  double err = 0.0;
  for (std::size_t j = 0; j < 6; ++j) err = std::max(err, std::abs(x[j] - r[j]));
  return err;
}

TEST(Step, FourthOrderConvergence) {
  const double h = 1e-3;
  const double e1 = terminal_error(h, h / 8.0);
  const double e2 = terminal_error(h / 2.0, h / 8.0);
  EXPECT_GT(e1, 0.0);
  EXPECT_GE(e1 / e2, 8.0) << e1 << " vs " << e2;
}

TEST(Action, ClampedToActuatorLimits) {
  const Action a = Action::clamped(1.0, -80.0, kCar);
  EXPECT_DOUBLE_EQ(a.phi, kCar.steering_limit);
  EXPECT_DOUBLE_EQ(a.omega_w, -kCar.wheel_speed_limit);
  const Action b = Action::clamped(-0.1, 3.0, kCar);
  EXPECT_EQ(b.phi, -0.1);
  EXPECT_EQ(b.omega_w, 3.0);
}

TEST(Params, Validation) {
  VehicleParams p;
  p.mass = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  TerrainParams t;
  t.mu_s = -1.0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TerrainParams{};
  t.slope = kPi / 2.0;
  EXPECT_THROW(t.validate(), ConfigError);
  ModelSettings m;
  m.sign_epsilon = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_NO_THROW(VehicleParams{}.validate());
}

}  // namespace
}  // namespace terraga
