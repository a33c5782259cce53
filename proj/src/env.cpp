#include "sidewalk/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sidewalk {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::A: return "A";
    case Stage::B: return "B";
    case Stage::C: return "C";
  }
  return "?";
}

std::string_view to_string(TerminationCause cause) {
  switch (cause) {
    case TerminationCause::None: return "none";
    case TerminationCause::Collision: return "collision";
    case TerminationCause::OutOfBounds: return "out_of_bounds";
    case TerminationCause::Goal: return "goal";
    case TerminationCause::Timeout: return "timeout";
  }
  return "?";
}

void EnvConfig::validate() const {
  geometry.validate();
  cei.validate();
  social_forces.validate();
  if (!(dt > 0.0) || max_steps <= 0) {
    throw std::invalid_argument("environment: dt and max_steps must be positive");
  }
  for (const Range& r : {threshold_range, eval_threshold_range}) {
    if (!(r.lo <= r.hi) || !(r.lo > 0.0) || !(r.hi < 1.0)) {
      throw std::invalid_argument("environment: risk threshold range must be ordered within (0, 1)");
    }
  }
  if (spawn_offset < 0.0 || eval_offset < 0.0 || goal_margin < 0.0) {
    throw std::invalid_argument("environment: offsets and goal margin must be non-negative");
  }
}

double reward_bound(const EnvConfig& c) {
  const RewardWeights& w = c.weights;
  const double speed = std::max(c.robot.max_speed, c.social_forces.v_cap);
  const double shaping = std::abs(w.progress) * speed * c.dt +
                         std::abs(w.velocity) * speed * c.dt +
                         std::abs(w.heading) * std::numbers::pi * c.dt +
                         std::abs(w.input) * 2.0 * c.dt + std::abs(w.input_rate) * 4.0 +
                         std::abs(w.risk) * c.dt;
  const double terminal =
      std::max({std::abs(w.collision), std::abs(w.out_of_bounds), std::abs(w.goal)});
  return shaping + terminal;
}

SidewalkEnv::SidewalkEnv(EnvConfig config) : config_(std::move(config)), cei_(config_.cei) {
  config_.validate();
}

Spawn SidewalkEnv::sample_spawn(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const bool eval = config_.mode == EnvMode::Evaluation;
  const double offset = eval ? config_.eval_offset : config_.spawn_offset;
  const Range thresholds = eval ? config_.eval_threshold_range : config_.threshold_range;
  std::uniform_real_distribution<double> spawn(-offset, offset);
  std::uniform_real_distribution<double> threshold(thresholds.lo, thresholds.hi);

  Spawn s;
  s.pedestrian_dx = spawn(rng);
  s.pedestrian_dy = spawn(rng);
  s.robot_dx = spawn(rng);
  s.robot_dy = spawn(rng);
  s.risk_threshold = threshold(rng);
  return s;
}

Observation SidewalkEnv::reset(std::uint64_t seed) { return reset(sample_spawn(seed)); }

Observation SidewalkEnv::reset(const Spawn& spawn) {
  cei_ = config_.cei;
  cei_.risk_threshold = spawn.risk_threshold;
  const double robot_dx = spawn.robot_dx;
  const double robot_dy = spawn.robot_dy;
  const double ped_dx = spawn.pedestrian_dx;
  const double ped_dy = spawn.pedestrian_dy;

  const double v0 = config_.robot.desired_speed;
  robot_ = {config_.geometry.length + robot_dx, robot_dy, std::numbers::pi, v0, 0.0};
  mass_ = {robot_.x, robot_.y, -v0, 0.0};

  const double ped_speed = config_.stage == Stage::C ? config_.pedestrian.forward_speed : 0.0;
  pedestrian_ = {ped_dx, ped_dy, 0.0, ped_speed, 0.0, 0.0};
  const double limit = config_.geometry.lateral_limit();
  plan_ = make_plan(pedestrian_, std::clamp(pedestrian_.y, -limit, limit), cei_);

  previous_action_ = {};
  steps_ = 0;
  ended_ = false;
  pedestrian_done_ = !has_pedestrian();
  reset_called_ = true;
  cause_ = TerminationCause::None;
  return observe();
}

Observation SidewalkEnv::observe() const {
  const SidewalkGeometry& g = config_.geometry;
  const double v_cap = config_.robot.max_speed;
  Observation o{};
  o[0] = robot_.x / g.length;
  o[1] = robot_.y / g.half_width();
  o[2] = heading_sin(robot_.psi);
  o[3] = std::cos(robot_.psi);
  o[4] = robot_.v / v_cap;
  o[5] = robot_.yaw_rate / 2.0;
  if (has_pedestrian()) {
    o[6] = pedestrian_.x / g.length;
    o[7] = pedestrian_.y / g.half_width();
    o[8] = heading_sin(pedestrian_.psi);
    o[9] = std::cos(pedestrian_.psi);
    o[10] = pedestrian_.v_f / v_cap;
    o[11] = pedestrian_.v_l;
    o[12] = pedestrian_.omega / 2.0;
  }
  o[13] = previous_action_.accel;
  o[14] = previous_action_.steer;
  return o;
}

ObservedPose SidewalkEnv::robot_pose_for_pedestrian() const {
  return {robot_.x, robot_.y, robot_.psi, robot_.v};
}

StepInfo SidewalkEnv::advance_pedestrian_state() {
  StepInfo info;
  if (config_.stage != Stage::C || pedestrian_done_) {
    return info;
  }
  CeiOutput out = cei_step(pedestrian_, robot_pose_for_pedestrian(), plan_, cei_, config_.geometry,
                           config_.pedestrian);
  pedestrian_ = step_pedestrian(pedestrian_, out.input, config_.dt, config_.pedestrian);
  plan_ = std::move(out.plan);
  info.risk = out.risk;
  info.normalized_risk = normalized_risk(out.risk, cei_);
  info.pedestrian_input = out.input;
  info.replanned = out.replanned;
  if (pedestrian_.x >= config_.geometry.length - config_.goal_margin) {
    pedestrian_done_ = true;
  }
  return info;
}

void SidewalkEnv::advance_robot_bicycle(const RobotAction& action) {
  robot_ = step_robot(robot_, action, config_.dt, config_.robot);
}

Vec2 SidewalkEnv::social_forces_force() const {
  std::optional<PedestrianState> other;
  if (has_pedestrian() && !pedestrian_done_) {
    other = pedestrian_;
  }
  return social_forces_control(mass_, other, config_.geometry, config_.social_forces);
}

void SidewalkEnv::advance_robot_point_mass(Vec2 force) {
  mass_ = step_point_mass(mass_, force, config_.dt, config_.social_forces.v_cap);

  const double speed = std::hypot(mass_.vx, mass_.vy);
  // Heading follows the velocity; it is held while the robot is (nearly) at rest.
  const double psi = speed >= 0.05 ? std::atan2(mass_.vy, mass_.vx) : robot_.psi;
  robot_.yaw_rate = wrap_angle(psi - robot_.psi) / config_.dt;
  robot_.x = mass_.x;
  robot_.y = mass_.y;
  robot_.psi = wrap_angle(psi);
  robot_.v = speed;
}

StepOutcome SidewalkEnv::step(const RobotAction& raw) {
  if (!reset_called_ || ended_) {
    throw std::logic_error("SidewalkEnv::step called on a finished episode");
  }
  if (config_.body != RobotBody::Bicycle) {
    throw std::logic_error("SidewalkEnv::step requires the bicycle robot");
  }
  const RobotAction action = clip_action(raw);
  const double previous_x = robot_.x;
  const StepInfo info = advance_pedestrian_state();
  advance_robot_bicycle(action);
  return finish_robot_step(action, previous_x, info);
}

StepOutcome SidewalkEnv::step_social_forces() {
  if (!reset_called_ || ended_) {
    throw std::logic_error("SidewalkEnv::step_social_forces called on a finished episode");
  }
  if (config_.body != RobotBody::PointMass) {
    throw std::logic_error("SidewalkEnv::step_social_forces requires the point-mass robot");
  }
  const double previous_x = robot_.x;
  // Both agents react to the state at the start of the step.
  const Vec2 force = social_forces_force();
  const StepInfo info = advance_pedestrian_state();
  advance_robot_point_mass(force);
  return finish_robot_step({}, previous_x, info);
}

StepOutcome SidewalkEnv::finish_robot_step(const RobotAction& action, double previous_x,
                                           const StepInfo& info) {
  const RewardWeights& w = config_.weights;
  const double dt = config_.dt;
  ++steps_;

  double reward = w.progress * (previous_x - robot_.x);
  reward -= w.velocity * std::abs(robot_.v - config_.robot.desired_speed) * dt;
  // |wrap(psi - pi)| written so that psi and -psi give the same value
  reward -= w.heading * (std::numbers::pi - std::abs(robot_.psi)) * dt;
  reward -= w.input * (std::abs(action.accel) + std::abs(action.steer)) * dt;
  reward -= w.input_rate * (std::abs(action.accel - previous_action_.accel) +
                            std::abs(action.steer - previous_action_.steer));
  if (config_.risk_averse) {
    reward -= w.risk * info.risk * dt;
  }
  previous_action_ = action;

  StepOutcome out;
  out.info = info;
  const bool ped_collidable = has_pedestrian() && !pedestrian_done_;
  if (ped_collidable && check_collision({robot_.x, robot_.y}, {pedestrian_.x, pedestrian_.y},
                                        config_.geometry.agent_radius)) {
    out.cause = TerminationCause::Collision;
    reward += w.collision;
  } else if (check_bounds(robot_.y, config_.geometry)) {
    out.cause = TerminationCause::OutOfBounds;
    reward += w.out_of_bounds;
  } else if (robot_.x <= config_.goal_margin) {
    out.cause = TerminationCause::Goal;
    reward += w.goal;
  } else if (steps_ >= config_.max_steps) {
    out.cause = TerminationCause::Timeout;
  }
  out.terminated = out.cause != TerminationCause::None && out.cause != TerminationCause::Timeout;
  out.truncated = out.cause == TerminationCause::Timeout;
  out.reward = reward;
  ended_ = out.terminated || out.truncated;
  cause_ = out.cause;
  out.observation = observe();
  return out;
}

StepOutcome SidewalkEnv::advance_pedestrian() {
  if (config_.mode != EnvMode::Evaluation || cause_ != TerminationCause::Goal) {
    throw std::logic_error("advance_pedestrian requires an evaluation episode ended at the goal");
  }
  StepOutcome out;
  out.cause = TerminationCause::Goal;
  if (pedestrian_done_ || steps_ >= config_.max_steps) {
    out.terminated = true;
    out.observation = observe();
    return out;
  }
  out.info = advance_pedestrian_state();
  if (config_.body == RobotBody::Bicycle) {
    advance_robot_bicycle({});
  } else {
    mass_.x += config_.dt * mass_.vx;
    mass_.y += config_.dt * mass_.vy;
    robot_.x = mass_.x;
    robot_.y = mass_.y;
  }
  ++steps_;
  out.terminated = pedestrian_done_;
  out.truncated = !pedestrian_done_ && steps_ >= config_.max_steps;
  out.observation = observe();
  return out;
}

}  // namespace sidewalk
