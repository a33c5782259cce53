#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sidewalk/social_forces.hpp"

using namespace sidewalk;

TEST(DrivingForce, Examples) {
  const SocialForcesParams p;
  const Vec2 f = driving_force({0, 0, 0, 0}, {-1, 0}, p);
  EXPECT_NEAR(f.x, -2.68, 1e-12);
  EXPECT_EQ(f.y, 0.0);
  const Vec2 eq = driving_force({5, 0, -1.34, 0}, {-1, 0}, p);
  EXPECT_EQ(eq.x, 0.0);
  EXPECT_EQ(eq.y, 0.0);
}

TEST(EllipseSemiMinor, StationaryIsCircle) {
  const SemiMinorAxis b = ellipse_semiminor_b({0.3, -1.2}, 0.0, {1, 0}, 2.0);
  EXPECT_NEAR(b.b, std::hypot(0.3, 1.2), 1e-15);
  EXPECT_FALSE(b.clamped);
}

TEST(EllipseSemiMinor, OtherWalksOntoThePoint) {
  const SemiMinorAxis b = ellipse_semiminor_b({2, 0}, 1.0, {1, 0}, 2.0);
  EXPECT_NEAR(b.b, 0.0, 1e-12);
}

TEST(EllipseSemiMinor, PerpendicularExample) {
  // 2b = sqrt((2 + sqrt(8))^2 - 4)
  const double oracle = 0.5 * std::sqrt(std::pow(2.0 + std::sqrt(8.0), 2) - 4.0);
  const SemiMinorAxis b = ellipse_semiminor_b({0, 2}, 1.0, {1, 0}, 2.0);
  EXPECT_NEAR(b.b, oracle, 1e-12);
  EXPECT_NEAR(b.b, 2.1974, 1e-4);
}

TEST(PedestrianRepulsion, StationaryAnalytic) {
  const SocialForcesParams p;
  const Vec2 f = pedestrian_repulsion({1, 0}, 0.0, {1, 0}, p);
  const double analytic = p.V0 / p.sigma * std::exp(-1.0 / p.sigma);
  EXPECT_NEAR(f.x, analytic, 1e-4 * analytic);
  EXPECT_NEAR(f.x, 0.2497, 1e-4);
  EXPECT_NEAR(f.y, 0.0, 1e-12);
}

TEST(PedestrianRepulsion, FiniteDifferenceMatchesIsotropicGradient) {
  const SocialForcesParams p;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    const Vec2 r{d(rng), d(rng)};
    const double n = r.norm();
    if (n < 0.2) continue;
    const double mag = p.V0 / p.sigma * std::exp(-n / p.sigma);
    const Vec2 expected{mag * r.x / n, mag * r.y / n};
    const Vec2 f = pedestrian_repulsion(r, 0.0, {1, 0}, p);
    const double err = (f - expected).norm() / expected.norm();
    ASSERT_LE(err, 1e-4) << "r=(" << r.x << "," << r.y << ")";
  }
}

TEST(PedestrianRepulsion, MonotoneDecay) {
  const SocialForcesParams p;
  double previous = pedestrian_repulsion({0.3, 0}, 0.0, {1, 0}, p).norm();
  for (double dist = 0.35; dist < 4.0; dist += 0.05) {
    const double m = pedestrian_repulsion({dist, 0}, 0.0, {1, 0}, p).norm();
    ASSERT_LT(m, previous);
    previous = m;
  }
}

TEST(PedestrianRepulsion, MirrorNegatesLateral) {
  const SocialForcesParams p;
  const Vec2 a = pedestrian_repulsion({-1.5, 0.4}, 1.34, {1, 0.1}, p);
  const Vec2 b = pedestrian_repulsion({-1.5, -0.4}, 1.34, {1, -0.1}, p);
  EXPECT_NEAR(a.x, b.x, 1e-12);
  EXPECT_NEAR(a.y, -b.y, 1e-12);
}

TEST(PedestrianRepulsion, CoincidentAgentsThrow) {
  EXPECT_THROW(pedestrian_repulsion({0, 0}, 1.0, {1, 0}, {}), std::domain_error);
}

TEST(BoundaryRepulsion, Centre) {
  const Vec2 f = boundary_repulsion(0.0, {}, {});
  EXPECT_EQ(f.x, 0.0);
  EXPECT_EQ(f.y, 0.0);
}

TEST(BoundaryRepulsion, NearWallExample) {
  const Vec2 f = boundary_repulsion(1.0, {}, {});
  const double expected = -50.0 * std::exp(-1.25) + 50.0 * std::exp(-11.25);
  EXPECT_NEAR(f.y, expected, 1e-12);
  EXPECT_NEAR(f.y, -14.33, 1e-2);
  EXPECT_EQ(f.x, 0.0);
}

TEST(BoundaryRepulsion, IncreasesTowardsWall) {
  double previous = 0.0;
  for (double y = 0.05; y < 1.25; y += 0.05) {
    const double m = std::abs(boundary_repulsion(y, {}, {}).y);
    ASSERT_GT(m, previous);
    previous = m;
  }
  EXPECT_TRUE(std::isfinite(boundary_repulsion(1.4, {}, {}).y));
}

TEST(SocialForcesControl, FarPedestrianContributesNothing) {
  const SocialForcesParams p;
  const PointMassState robot{14.5, 0.1, -1.34, 0};
  const PedestrianState ped{0.5, 0.0, 0.0, 1.34, 0, 0};
  const Vec2 with = social_forces_control(robot, ped, {}, p);
  const Vec2 without = social_forces_control(robot, std::nullopt, {}, p);
  EXPECT_LT((with - without).norm(), 1e-9);
}

TEST(SocialForcesControl, SymmetricHeadOnHasNoLateralForce) {
  const PointMassState robot{10, 0, -1.34, 0};
  const PedestrianState ped{5, 0, 0, 1.34, 0, 0};
  EXPECT_EQ(social_forces_control(robot, ped, {}, {}).y, 0.0);
}

TEST(SocialForcesControl, InitialForceFromRest) {
  const Vec2 f = social_forces_control({15, 0, 0, 0}, std::nullopt, {}, {});
  EXPECT_NEAR(f.x, -2.68, 1e-12);
  EXPECT_NEAR(f.y, 0.0, 1e-12);
}

TEST(SocialForcesControl, MirrorEquivariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-0.9, 0.9);
  for (int i = 0; i < 200; ++i) {
    const PointMassState r{9 + d(rng), d(rng), -1.3, 0.2 * d(rng)};
    const PedestrianState ped{6 + d(rng), d(rng), 0.3 * d(rng), 1.34, 0, 0};
    const PointMassState rm{r.x, -r.y, r.vx, -r.vy};
    const PedestrianState pm{ped.x, -ped.y, -ped.psi, ped.v_f, 0, 0};
    const Vec2 a = social_forces_control(r, ped, {}, {});
    const Vec2 b = social_forces_control(rm, pm, {}, {});
    ASSERT_NEAR(a.x, b.x, 1e-9);
    ASSERT_NEAR(a.y, -b.y, 1e-9);
  }
}

TEST(SocialForcesControl, ReachesDesiredSpeedOnEmptySidewalk) {
  const SocialForcesParams p;
  PointMassState s{15, 0, 0, 0};
  const double dt = 0.05;
  double t = 0.0;
  while (std::hypot(s.vx, s.vy) < 0.95 * p.v_des && t < 10.0) {
    s = step_point_mass(s, social_forces_control(s, std::nullopt, {}, p), dt, p.v_cap);
    t += dt;
  }
  EXPECT_LE(t, 3 * p.tau + 1e-9);
}

TEST(SocialForcesParams, Validation) {
  SocialForcesParams p;
  EXPECT_NO_THROW(p.validate());
  p.v_cap = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}
