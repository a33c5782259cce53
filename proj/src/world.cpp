#include "sidewalk/world.hpp"

#include <algorithm>
#include <numbers>
#include <string>

namespace sidewalk {

namespace {

void require_finite(std::initializer_list<double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": non-finite value");
    }
  }
}

void require_positive_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("time step must be positive and finite");
  }
}

}  // namespace

void SidewalkGeometry::validate() const {
  if (!(length > 0.0) || !(width > 0.0) || !(agent_radius > 0.0)) {
    throw std::invalid_argument("sidewalk geometry: dimensions must be positive");
  }
  if (!(2.0 * agent_radius < width)) {
    throw std::invalid_argument("sidewalk geometry: agent does not fit across the sidewalk");
  }
}

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("wrap_angle: non-finite angle");
  }
  constexpr double kPi = std::numbers::pi;
  double r = std::remainder(theta, 2.0 * kPi);
  if (r <= -kPi) {
    r += 2.0 * kPi;
  }
  return r;
}

PedestrianState step_pedestrian(const PedestrianState& s, const PedestrianInput& u, double dt,
                                const PedestrianParams& params) {
  require_positive_dt(dt);
  require_finite({s.x, s.y, s.psi, s.v_f, s.v_l, s.omega}, "step_pedestrian state");
  require_finite({u.steering, u.sidestep}, "step_pedestrian input");

  const double c = std::cos(s.psi);
  const double sn = heading_sin(s.psi);
  PedestrianState next;
  next.x = s.x + dt * (s.v_f * c - s.v_l * sn);
  next.y = s.y + dt * (s.v_f * sn + s.v_l * c);
  next.psi = wrap_angle(s.psi + dt * s.omega);
  next.v_f = s.v_f;
  next.v_l = s.v_l + dt * (u.sidestep - params.lateral_damping * s.v_l);
  next.omega = s.omega + dt * u.steering;
  return next;
}

RobotState step_robot(const RobotState& s, const RobotAction& a, double dt,
                      const RobotParams& params) {
  require_positive_dt(dt);
  require_finite({s.x, s.y, s.psi, s.v}, "step_robot state");
  require_finite({a.accel, a.steer}, "step_robot action");

  const double accel = a.accel * params.max_accel;
  const double delta = a.steer * params.max_steer;
  const double yaw_rate = s.v / params.wheelbase * std::tan(delta);

  RobotState next;
  next.x = s.x + dt * s.v * std::cos(s.psi);
  next.y = s.y + dt * s.v * heading_sin(s.psi);
  next.psi = wrap_angle(s.psi + dt * yaw_rate);
  next.v = std::clamp(s.v + dt * accel, 0.0, params.max_speed);
  next.yaw_rate = yaw_rate;
  return next;
}

PointMassState step_point_mass(const PointMassState& s, Vec2 force, double dt, double speed_cap) {
  require_positive_dt(dt);
  require_finite({s.x, s.y, s.vx, s.vy, force.x, force.y}, "step_point_mass");

  double vx = s.vx + dt * force.x;
  double vy = s.vy + dt * force.y;
  const double speed = std::hypot(vx, vy);
  if (speed > speed_cap) {
    const double scale = speed_cap / speed;
    vx *= scale;
    vy *= scale;
  }
  return {s.x + dt * vx, s.y + dt * vy, vx, vy};
}

bool check_collision(Vec2 a, Vec2 b, double radius) {
  return (a - b).norm() < 2.0 * radius;
}

bool check_bounds(double y, const SidewalkGeometry& geometry) {
  return std::abs(y) > geometry.lateral_limit();
}

RobotAction clip_action(const RobotAction& a) {
  return {std::clamp(a.accel, -1.0, 1.0), std::clamp(a.steer, -1.0, 1.0)};
}

}  // namespace sidewalk
