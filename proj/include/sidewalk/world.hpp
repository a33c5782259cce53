#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sidewalk {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }

// Sidewalk frame: x in [0, length] along the walkway, y in [-width/2, width/2],
// headings measured from +x.
struct SidewalkGeometry {
  double length = 15.0;
  double width = 2.5;
  double agent_radius = 0.3;

  double half_width() const { return 0.5 * width; }
  // Largest |y| an agent centre may reach without leaving the sidewalk.
  double lateral_limit() const { return half_width() - agent_radius; }

  void validate() const;
};

struct PedestrianParams {
  double forward_speed = 1.34;     // m/s, constant
  double lateral_damping = 2.0;    // 1/s
  double max_steering = 2.0;       // rad/s^2
  double max_sidestep = 2.0;       // m/s^2
};

struct PedestrianState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double v_f = 0.0;    // forward speed
  double v_l = 0.0;    // lateral (sidestep) speed, positive to the left
  double omega = 0.0;  // yaw rate
};

struct PedestrianInput {
  double steering = 0.0;  // yaw acceleration
  double sidestep = 0.0;  // lateral acceleration
};

struct RobotParams {
  double wheelbase = 0.6;
  double max_accel = 1.5;
  double max_steer = 0.5;
  double max_speed = 2.5;
  double desired_speed = 1.34;
};

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double v = 0.0;
  double yaw_rate = 0.0;
};

// Normalised bicycle command, both components in [-1, 1].
struct RobotAction {
  double accel = 0.0;
  double steer = 0.0;
};

struct PointMassState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
};

// sin of a wrapped heading. pi also stands for -pi, so it maps to exactly 0;
// this keeps reflections about y = 0 bit-exact for agents heading along -x.
inline double heading_sin(double psi) { return psi == std::numbers::pi ? 0.0 : std::sin(psi); }

// Maps theta onto (-pi, pi]. Throws std::invalid_argument for non-finite input.
double wrap_angle(double theta);

PedestrianState step_pedestrian(const PedestrianState& s, const PedestrianInput& u, double dt,
                                const PedestrianParams& params = {});

RobotState step_robot(const RobotState& s, const RobotAction& a, double dt,
                      const RobotParams& params = {});

PointMassState step_point_mass(const PointMassState& s, Vec2 force, double dt, double speed_cap);

// Strict: touching discs (distance == 2r) do not collide.
bool check_collision(Vec2 a, Vec2 b, double radius);

// True when the agent centre is farther than lateral_limit() from the centreline.
bool check_bounds(double y, const SidewalkGeometry& geometry);

RobotAction clip_action(const RobotAction& a);

}  // namespace sidewalk
