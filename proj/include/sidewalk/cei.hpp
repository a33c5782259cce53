#pragma once

#include <vector>

#include "sidewalk/world.hpp"

namespace sidewalk {

// Communication-enabled interaction (CEI) pedestrian.
//
// All quantities are expressed in the pedestrian's own walking frame: it walks
// towards +x and its left is +y. The pedestrian keeps a deterministic plan (a
// lateral target it converges to) and a Gaussian belief over where the other
// agent will be laterally at a grid of lookahead times. The probability that
// the other ends up within the lateral collision margin while longitudinally
// co-located is the perceived risk. Exceeding the personal threshold triggers a
// replan over a discrete set of lateral offsets.

struct TrackingGains {
  double lateral = 3.0;          // k_y
  double lateral_velocity = 2.5; // k_vy
  double heading = 4.0;          // k_psi
  double yaw_rate = 2.0;         // k_w
  double heading_per_metre = 0.4;   // heading correction towards the target [rad/m]
  double heading_damping = 0.5;     // heading correction against lateral velocity [rad s/m]
  double max_heading_offset = 0.5;  // [rad]
};

struct CeiParams {
  double risk_threshold = 0.65;
  int horizon_steps = 12;          // K
  double lookahead_step = 0.5;     // dtau [s]
  double sigma0 = 0.1;             // [m]
  double sigma_growth = 0.15;      // [m/s]
  double lateral_margin = 0.6;     // d_lat [m]
  double longitudinal_margin = 1.0;// x_margin [m]
  double plan_time_constant = 1.0; // convergence of the planned path to the target [s]
  std::vector<double> candidate_offsets = {-0.95, -0.75, -0.55, -0.35, -0.15,
                                           0.15,  0.35,  0.55,  0.75,  0.95};
  TrackingGains gains;

  void validate() const;
  double lookahead(int k) const { return (k + 1) * lookahead_step; }
};

// What the pedestrian sees of the other agent, in its own frame.
struct ObservedPose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double speed = 0.0;
};

struct BeliefPoint {
  double tau = 0.0;
  double mean = 0.0;    // lateral position, clamped to the walkable band
  double sigma = 0.0;
  double x_pred = 0.0;  // predicted longitudinal position of the other

  // Probability mass of the belief within [lo, hi], for the Gaussian truncated
  // to the sidewalk [-half_width, half_width] and renormalised.
  double mass_on_sidewalk(double lo, double hi, double half_width) const;
};

struct Belief {
  std::vector<BeliefPoint> points;
};

struct PlanPoint {
  double tau = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct Plan {
  double target_lateral = 0.0;
  std::vector<PlanPoint> points;
};

struct CeiOutput {
  PedestrianInput input;
  Plan plan;
  double risk = 0.0;     // risk of the plan held at the start of the step
  bool replanned = false;
};

// Standard normal probability mass in [z_lo, z_hi]. Exactly mirror symmetric:
// gaussian_interval_mass(a, b) == gaussian_interval_mass(-b, -a) bitwise.
double gaussian_interval_mass(double z_lo, double z_hi);

Belief observe_belief(const ObservedPose& other, const CeiParams& params,
                      const SidewalkGeometry& geometry);

Plan make_plan(const PedestrianState& self, double target_lateral, const CeiParams& params);

double perceived_risk(const Plan& plan, const Belief& belief, const CeiParams& params);

// Picks the candidate (or the current target) with minimal risk; ties go to the
// offset closest to the current target, then to the smallest |offset|.
Plan replan(const Plan& current, const Belief& belief, const PedestrianState& self,
            const CeiParams& params);

PedestrianInput tracking_input(const PedestrianState& self, double target_lateral,
                               const CeiParams& params, const PedestrianParams& body);

CeiOutput cei_step(const PedestrianState& self, const ObservedPose& other, const Plan& plan,
                   const CeiParams& params, const SidewalkGeometry& geometry,
                   const PedestrianParams& body = {});

double normalized_risk(double risk, const CeiParams& params);

// Two CEI pedestrians walking towards each other. Each state is kept in its own
// walking frame; agent B's world pose is the 180 degree rotation of its frame
// about the sidewalk centre.
struct CeiPairConfig {
  SidewalkGeometry geometry;
  PedestrianParams body;
  CeiParams a;
  CeiParams b;
  double dt = 0.05;
  int max_steps = 600;
  double goal_margin = 0.5;
};

struct CeiPairStep {
  double t = 0.0;
  PedestrianState a;      // world frame
  PedestrianState b;      // world frame
  PedestrianInput input_a;
  PedestrianInput input_b;
  double risk_a = 0.0;
  double risk_b = 0.0;
  double target_a = 0.0;  // world frame lateral target
  double target_b = 0.0;
  bool replanned_a = false;
  bool replanned_b = false;
};

struct CeiPairResult {
  std::vector<CeiPairStep> steps;
  bool collision = false;
  bool out_of_bounds = false;
  bool both_reached_goal = false;
};

// Initial positions are given as lateral world offsets at each agent's end.
CeiPairResult simulate_cei_pair(const CeiPairConfig& config, double y_a, double y_b);

// Number of episodes in which, after both agents have replanned at least once,
// their world targets sit on the same side of the centreline (|target| > 0.1 m).
// Each switch of that shared side counts as a new deviation.
int count_same_side_deviations(const CeiPairResult& result);

// World pose of an agent walking in -x whose own-frame state is s.
PedestrianState reversed_to_world(const PedestrianState& s, double length);
// Pose of an opposite-walking agent (own frame state s) seen from the other frame.
ObservedPose observe_opposite(const PedestrianState& s, double length);

}  // namespace sidewalk
