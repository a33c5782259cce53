#pragma once

#include <optional>

#include "sidewalk/world.hpp"

namespace sidewalk {

// Helbing & Molnar (1995) constants. Noise, view-angle weighting and attractive
// terms are not modelled.
struct SocialForcesParams {
  double tau = 0.5;           // relaxation time [s]
  double V0 = 2.1;            // pedestrian potential amplitude [m^2/s^2]
  double sigma = 0.3;         // pedestrian potential range [m]
  double U0 = 10.0;           // border potential amplitude [m^2/s^2]
  double R = 0.2;             // border potential range [m]
  double delta_t = 2.0;       // anticipation interval of the ellipse [s]
  double v_des = 1.34;        // [m/s]
  double v_cap = 1.3 * 1.34;  // [m/s]
  double fd_step = 1e-4;      // central-difference step for the anisotropic gradient [m]

  void validate() const;
};

struct SemiMinorAxis {
  double b = 0.0;
  bool clamped = false;  // the radicand was negative and was clamped to zero
};

Vec2 driving_force(const PointMassState& s, Vec2 goal_dir, const SocialForcesParams& p);

// r_rel points from the other agent to the agent being pushed; e_other is the
// other agent's walking direction.
SemiMinorAxis ellipse_semiminor_b(Vec2 r_rel, double v_other, Vec2 e_other, double delta_t);

// -grad V0*exp(-b/sigma), differentiated numerically with respect to r_rel.
// Throws std::domain_error when the two agents coincide.
Vec2 pedestrian_repulsion(Vec2 r_rel, double v_other, Vec2 e_other, const SocialForcesParams& p);

Vec2 boundary_repulsion(double y, const SidewalkGeometry& geometry, const SocialForcesParams& p);

// Total force on the robot. The pedestrian term is skipped when ped is empty.
Vec2 social_forces_control(const PointMassState& robot, const std::optional<PedestrianState>& ped,
                           const SidewalkGeometry& geometry, const SocialForcesParams& p,
                           Vec2 goal_dir = {-1.0, 0.0});

}  // namespace sidewalk
