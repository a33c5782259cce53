#include "sidewalk/cei.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sidewalk {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

bool is_better_candidate(double risk, double offset, double best_risk, double best_offset,
                         double current) {
  if (risk != best_risk) {
    return risk < best_risk;
  }
  const double d = std::abs(offset - current);
  const double best_d = std::abs(best_offset - current);
  if (d != best_d) {
    return d < best_d;
  }
  return std::abs(offset) < std::abs(best_offset);
}

}  // namespace

void CeiParams::validate() const {
  if (!(risk_threshold > 0.0 && risk_threshold < 1.0)) {
    throw std::invalid_argument("CEI risk threshold must lie in (0, 1)");
  }
  if (horizon_steps <= 0 || !(lookahead_step > 0.0)) {
    throw std::invalid_argument("CEI lookahead grid must be non-empty");
  }
  if (!(sigma0 > 0.0) || sigma_growth < 0.0) {
    throw std::invalid_argument("CEI belief uncertainty must be positive and non-decreasing");
  }
  if (!(lateral_margin > 0.0) || !(longitudinal_margin > 0.0) || !(plan_time_constant > 0.0)) {
    throw std::invalid_argument("CEI margins must be positive");
  }
  if (candidate_offsets.empty()) {
    throw std::invalid_argument("CEI candidate offset set is empty");
  }
}

double gaussian_interval_mass(double z_lo, double z_hi) {
  if (!(z_lo < z_hi)) {
    return 0.0;
  }
  if (z_lo >= 0.0) {
    return 0.5 * (std::erfc(z_lo * kInvSqrt2) - std::erfc(z_hi * kInvSqrt2));
  }
  if (z_hi <= 0.0) {
    return 0.5 * (std::erfc(-z_hi * kInvSqrt2) - std::erfc(-z_lo * kInvSqrt2));
  }
  return 1.0 - 0.5 * (std::erfc(-z_lo * kInvSqrt2) + std::erfc(z_hi * kInvSqrt2));
}

double BeliefPoint::mass_on_sidewalk(double lo, double hi, double half_width) const {
  lo = std::max(lo, -half_width);
  hi = std::min(hi, half_width);
  if (!(lo < hi)) {
    return 0.0;
  }
  const double inside = gaussian_interval_mass((-half_width - mean) / sigma,
                                               (half_width - mean) / sigma);
  return gaussian_interval_mass((lo - mean) / sigma, (hi - mean) / sigma) / inside;
}

Belief observe_belief(const ObservedPose& other, const CeiParams& params,
                      const SidewalkGeometry& geometry) {
  if (!std::isfinite(other.x) || !std::isfinite(other.y) || !std::isfinite(other.psi) ||
      !std::isfinite(other.speed)) {
    throw std::invalid_argument("observe_belief: non-finite observation");
  }
  const double limit = geometry.lateral_limit();
  const double lateral_rate = heading_sin(other.psi) * other.speed;
  const double longitudinal_rate = std::cos(other.psi) * other.speed;

  Belief belief;
  belief.points.reserve(static_cast<std::size_t>(params.horizon_steps));
  for (int k = 0; k < params.horizon_steps; ++k) {
    const double tau = params.lookahead(k);
    BeliefPoint p;
    p.tau = tau;
    p.mean = std::clamp(other.y + lateral_rate * tau, -limit, limit);
    p.sigma = params.sigma0 + params.sigma_growth * tau;
    p.x_pred = other.x + longitudinal_rate * tau;
    belief.points.push_back(p);
  }
  return belief;
}

Plan make_plan(const PedestrianState& self, double target_lateral, const CeiParams& params) {
  Plan plan;
  plan.target_lateral = target_lateral;
  plan.points.reserve(static_cast<std::size_t>(params.horizon_steps));
  const double offset = self.y - target_lateral;
  for (int k = 0; k < params.horizon_steps; ++k) {
    const double tau = params.lookahead(k);
    plan.points.push_back(
        {tau, self.x + self.v_f * tau,
         target_lateral + offset * std::exp(-tau / params.plan_time_constant)});
  }
  return plan;
}

double perceived_risk(const Plan& plan, const Belief& belief, const CeiParams& params) {
  const std::size_t n = std::min(plan.points.size(), belief.points.size());
  double risk = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const PlanPoint& own = plan.points[k];
    const BeliefPoint& other = belief.points[k];
    if (!(std::abs(own.x - other.x_pred) < params.longitudinal_margin)) {
      continue;
    }
    const double gap = own.y - other.mean;
    const double r = gaussian_interval_mass((gap - params.lateral_margin) / other.sigma,
                                            (gap + params.lateral_margin) / other.sigma);
    risk = std::max(risk, r);
  }
  return risk;
}

Plan replan(const Plan& current, const Belief& belief, const PedestrianState& self,
            const CeiParams& params) {
  if (params.candidate_offsets.empty()) {
    throw std::invalid_argument("replan: empty candidate set");
  }
  const double held = current.target_lateral;
  Plan best = make_plan(self, held, params);
  double best_risk = perceived_risk(best, belief, params);
  for (double offset : params.candidate_offsets) {
    Plan candidate = make_plan(self, offset, params);
    const double risk = perceived_risk(candidate, belief, params);
    if (is_better_candidate(risk, offset, best_risk, best.target_lateral, held)) {
      best = std::move(candidate);
      best_risk = risk;
    }
  }
  return best;
}

PedestrianInput tracking_input(const PedestrianState& self, double target_lateral,
                               const CeiParams& params, const PedestrianParams& body) {
  const TrackingGains& g = params.gains;
  const double error = target_lateral - self.y;
  const double sidestep = g.lateral * error - g.lateral_velocity * self.v_l;
  const double lateral_velocity = self.v_f * heading_sin(self.psi) + self.v_l * std::cos(self.psi);
  const double heading_goal =
      std::clamp(g.heading_per_metre * error - g.heading_damping * lateral_velocity,
                 -g.max_heading_offset, g.max_heading_offset);
  const double steering = g.heading * wrap_angle(heading_goal - self.psi) - g.yaw_rate * self.omega;
  return {std::clamp(steering, -body.max_steering, body.max_steering),
          std::clamp(sidestep, -body.max_sidestep, body.max_sidestep)};
}

CeiOutput cei_step(const PedestrianState& self, const ObservedPose& other, const Plan& plan,
                   const CeiParams& params, const SidewalkGeometry& geometry,
                   const PedestrianParams& body) {
  const Belief belief = observe_belief(other, params, geometry);
  CeiOutput out;
  out.plan = make_plan(self, plan.target_lateral, params);
  out.risk = perceived_risk(out.plan, belief, params);
  if (out.risk > params.risk_threshold) {
    out.plan = replan(out.plan, belief, self, params);
    out.replanned = true;
  }
  out.input = tracking_input(self, out.plan.target_lateral, params, body);
  return out;
}

double normalized_risk(double risk, const CeiParams& params) {
  return risk / params.risk_threshold;
}

PedestrianState reversed_to_world(const PedestrianState& s, double length) {
  PedestrianState w = s;
  w.x = length - s.x;
  w.y = -s.y;
  w.psi = wrap_angle(s.psi + std::numbers::pi);
  // Lateral speed and yaw rate keep their body-frame meaning.
  return w;
}

ObservedPose observe_opposite(const PedestrianState& s, double length) {
  return {length - s.x, -s.y, wrap_angle(s.psi + std::numbers::pi), s.v_f};
}

CeiPairResult simulate_cei_pair(const CeiPairConfig& config, double y_a, double y_b) {
  config.geometry.validate();
  config.a.validate();
  config.b.validate();
  const double limit = config.geometry.lateral_limit();
  const double length = config.geometry.length;
  const double goal_x = length - config.goal_margin;

  PedestrianState a{0.0, y_a, 0.0, config.body.forward_speed, 0.0, 0.0};
  PedestrianState b{0.0, -y_b, 0.0, config.body.forward_speed, 0.0, 0.0};
  Plan plan_a = make_plan(a, std::clamp(a.y, -limit, limit), config.a);
  Plan plan_b = make_plan(b, std::clamp(b.y, -limit, limit), config.b);
  bool done_a = false;
  bool done_b = false;

  CeiPairResult result;
  auto record = [&](double t, const PedestrianInput& ua, const PedestrianInput& ub, double ra,
                    double rb, bool rpa, bool rpb) {
    result.steps.push_back({t, a, reversed_to_world(b, length), ua, ub, ra, rb,
                            plan_a.target_lateral, -plan_b.target_lateral, rpa, rpb});
  };
  record(0.0, {}, {}, 0.0, 0.0, false, false);

  for (int step = 1; step <= config.max_steps; ++step) {
    CeiOutput out_a;
    CeiOutput out_b;
    if (!done_a) {
      out_a = cei_step(a, observe_opposite(b, length), plan_a, config.a, config.geometry,
                       config.body);
    }
    if (!done_b) {
      out_b = cei_step(b, observe_opposite(a, length), plan_b, config.b, config.geometry,
                       config.body);
    }
    if (!done_a) {
      a = step_pedestrian(a, out_a.input, config.dt, config.body);
      plan_a = std::move(out_a.plan);
    }
    if (!done_b) {
      b = step_pedestrian(b, out_b.input, config.dt, config.body);
      plan_b = std::move(out_b.plan);
    }
    record(step * config.dt, out_a.input, out_b.input, out_a.risk, out_b.risk, out_a.replanned,
           out_b.replanned);

    const PedestrianState b_world = reversed_to_world(b, length);
    if (!done_a && !done_b &&
        check_collision({a.x, a.y}, {b_world.x, b_world.y}, config.geometry.agent_radius)) {
      result.collision = true;
      return result;
    }
    // Leaving the walkable band is reported but does not end the encounter.
    if (check_bounds(a.y, config.geometry) || check_bounds(b.y, config.geometry)) {
      result.out_of_bounds = true;
    }
    done_a = done_a || a.x >= goal_x;
    done_b = done_b || b.x >= goal_x;
    if (done_a && done_b) {
      result.both_reached_goal = true;
      return result;
    }
  }
  return result;
}

int count_same_side_deviations(const CeiPairResult& result) {
  bool replanned_a = false;
  bool replanned_b = false;
  int count = 0;
  double side = 0.0;
  for (const auto& s : result.steps) {
    replanned_a = replanned_a || s.replanned_a;
    replanned_b = replanned_b || s.replanned_b;
    if (replanned_a && replanned_b && s.target_a * s.target_b > 0.0 && std::abs(s.target_a) > 0.1) {
      const double now = s.target_a > 0.0 ? 1.0 : -1.0;
      if (now != side) {
        ++count;
        side = now;
      }
    } else {
      side = 0.0;
    }
  }
  return count;
}

}  // namespace sidewalk
