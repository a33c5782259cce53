#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string_view>

#include "sidewalk/cei.hpp"
#include "sidewalk/social_forces.hpp"
#include "sidewalk/world.hpp"

namespace sidewalk {

// Curriculum stages: no pedestrian, stationary pedestrian, CEI pedestrian.
enum class Stage { A, B, C };
enum class EnvMode { Training, Evaluation };
enum class RobotBody { Bicycle, PointMass };
enum class TerminationCause { None, Collision, OutOfBounds, Goal, Timeout };

std::string_view to_string(Stage stage);
std::string_view to_string(TerminationCause cause);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct RewardWeights {
  double progress = 1.0;     // per metre travelled towards the goal
  double velocity = 0.1;     // per (m/s of speed error) per second
  double heading = 0.1;      // per (rad of heading error) per second
  double input = 0.05;       // per unit of |a_n| + |s_n| per second
  double input_rate = 0.05;  // per unit change of the action between steps
  double collision = -50.0;
  double out_of_bounds = -50.0;
  double goal = 20.0;
  double risk = 1.0;         // per unit perceived risk per second, risk-averse only
};

struct EnvConfig {
  SidewalkGeometry geometry;
  double dt = 0.05;
  int max_steps = 600;
  Stage stage = Stage::C;
  EnvMode mode = EnvMode::Training;
  RobotBody body = RobotBody::Bicycle;
  Range threshold_range{0.6, 0.9};
  Range eval_threshold_range{0.6, 0.7};
  double spawn_offset = 0.4;       // training offsets ~ U[-spawn_offset, spawn_offset] in x and y
  double eval_offset = 0.1;        // evaluation offsets ~ U[-eval_offset, eval_offset]
  double goal_margin = 0.5;        // robot goal line at x = goal_margin
  RewardWeights weights;
  bool risk_averse = false;
  RobotParams robot;
  PedestrianParams pedestrian;
  CeiParams cei;
  SocialForcesParams social_forces;

  void validate() const;
};

inline constexpr int kObservationSize = 15;
using Observation = std::array<double, kObservationSize>;

struct StepInfo {
  double risk = 0.0;
  double normalized_risk = 0.0;
  PedestrianInput pedestrian_input;
  bool replanned = false;
};

struct StepOutcome {
  Observation observation{};
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  TerminationCause cause = TerminationCause::None;
  StepInfo info;
};

// Upper bound on |reward| of a single step for the given configuration.
double reward_bound(const EnvConfig& config);

// Offsets added to the nominal spawn poses, plus the pedestrian's threshold.
struct Spawn {
  double pedestrian_dx = 0.0;
  double pedestrian_dy = 0.0;
  double robot_dx = 0.0;
  double robot_dy = 0.0;
  double risk_threshold = 0.75;
};

// One head-on encounter. Deterministic given the reset seed.
class SidewalkEnv {
 public:
  explicit SidewalkEnv(EnvConfig config);

  Observation reset(std::uint64_t seed);
  Observation reset(const Spawn& spawn);
  Spawn sample_spawn(std::uint64_t seed) const;

  // Bicycle robot. The action is clipped to [-1, 1].
  StepOutcome step(const RobotAction& action);
  // Point-mass robot driven by the social-forces controller.
  StepOutcome step_social_forces();

  // Evaluation only: after the robot reached its goal, keeps simulating the
  // pedestrian (robot continues straight, not collidable) until it reaches its
  // own goal or the step budget runs out.
  StepOutcome advance_pedestrian();

  Observation observe() const;

  const EnvConfig& config() const { return config_; }
  const RobotState& robot() const { return robot_; }
  const PedestrianState& pedestrian() const { return pedestrian_; }
  const Plan& plan() const { return plan_; }
  double risk_threshold() const { return cei_.risk_threshold; }
  int steps() const { return steps_; }
  double time() const { return steps_ * config_.dt; }
  bool has_pedestrian() const { return config_.stage != Stage::A; }
  bool episode_over() const { return ended_; }
  bool pedestrian_finished() const { return pedestrian_done_; }
  TerminationCause cause() const { return cause_; }
  RobotAction previous_action() const { return previous_action_; }

 private:
  ObservedPose robot_pose_for_pedestrian() const;
  StepInfo advance_pedestrian_state();
  void advance_robot_bicycle(const RobotAction& action);
  Vec2 social_forces_force() const;
  void advance_robot_point_mass(Vec2 force);
  StepOutcome finish_robot_step(const RobotAction& action, double previous_x,
                                const StepInfo& info);

  EnvConfig config_;
  CeiParams cei_;
  RobotState robot_;
  PointMassState mass_;
  PedestrianState pedestrian_;
  Plan plan_;
  RobotAction previous_action_;
  int steps_ = 0;
  bool ended_ = true;
  bool pedestrian_done_ = false;
  bool reset_called_ = false;
  TerminationCause cause_ = TerminationCause::None;
};

}  // namespace sidewalk
