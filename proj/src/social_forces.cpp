#include "sidewalk/social_forces.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sidewalk {

void SocialForcesParams::validate() const {
  if (!(tau > 0 && V0 > 0 && sigma > 0 && U0 > 0 && R > 0 && delta_t > 0 && v_des > 0 &&
        v_cap > 0 && fd_step > 0)) {
    throw std::invalid_argument("social forces parameters must be strictly positive");
  }
  if (v_cap < v_des) {
    throw std::invalid_argument("social forces speed cap below desired speed");
  }
}

Vec2 driving_force(const PointMassState& s, Vec2 goal_dir, const SocialForcesParams& p) {
  return {(p.v_des * goal_dir.x - s.vx) / p.tau, (p.v_des * goal_dir.y - s.vy) / p.tau};
}

SemiMinorAxis ellipse_semiminor_b(Vec2 r_rel, double v_other, Vec2 e_other, double delta_t) {
  const double step = v_other * delta_t;
  const double sum = r_rel.norm() + (r_rel - step * e_other).norm();
  const double radicand = sum * sum - step * step;
  if (radicand < 0.0) {
    return {0.0, true};
  }
  return {0.5 * std::sqrt(radicand), false};
}

namespace {

double pedestrian_potential(Vec2 r_rel, double v_other, Vec2 e_other, const SocialForcesParams& p) {
  return p.V0 * std::exp(-ellipse_semiminor_b(r_rel, v_other, e_other, p.delta_t).b / p.sigma);
}

}  // namespace

Vec2 pedestrian_repulsion(Vec2 r_rel, double v_other, Vec2 e_other, const SocialForcesParams& p) {
  if (r_rel.norm() == 0.0) {
    throw std::domain_error("pedestrian_repulsion: agents coincide");
  }
  const double h = p.fd_step;
  const double dx = pedestrian_potential({r_rel.x + h, r_rel.y}, v_other, e_other, p) -
                    pedestrian_potential({r_rel.x - h, r_rel.y}, v_other, e_other, p);
  const double dy = pedestrian_potential({r_rel.x, r_rel.y + h}, v_other, e_other, p) -
                    pedestrian_potential({r_rel.x, r_rel.y - h}, v_other, e_other, p);
  return {-dx / (2.0 * h), -dy / (2.0 * h)};
}

Vec2 boundary_repulsion(double y, const SidewalkGeometry& geometry, const SocialForcesParams& p) {
  const double w = geometry.half_width();
  // Distances saturate at zero on or beyond a border.
  const double to_upper = std::max(0.0, w - y);
  const double to_lower = std::max(0.0, y + w);
  const double push_down = p.U0 / p.R * std::exp(-to_upper / p.R);
  const double push_up = p.U0 / p.R * std::exp(-to_lower / p.R);
  return {0.0, push_up - push_down};
}

Vec2 social_forces_control(const PointMassState& robot, const std::optional<PedestrianState>& ped,
                           const SidewalkGeometry& geometry, const SocialForcesParams& p,
                           Vec2 goal_dir) {
  Vec2 force = driving_force(robot, goal_dir, p) + boundary_repulsion(robot.y, geometry, p);
  if (ped) {
    const Vec2 r_rel{robot.x - ped->x, robot.y - ped->y};
    const Vec2 e_other{std::cos(ped->psi), heading_sin(ped->psi)};
    force = force + pedestrian_repulsion(r_rel, std::abs(ped->v_f), e_other, p);
  }
  return force;
}

}  // namespace sidewalk
