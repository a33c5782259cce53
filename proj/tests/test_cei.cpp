#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sidewalk/cei.hpp"

using namespace sidewalk;

namespace {

constexpr double kPi = std::numbers::pi;

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Plan and belief with a single conflicting lookahead point.
struct SinglePoint {
  Plan plan;
  Belief belief;
};

SinglePoint single_point(double y_plan, double mean, double sigma, double dx) {
  SinglePoint s;
  s.plan.points = {{1.0, 5.0, y_plan}};
  s.belief.points = {{1.0, mean, sigma, 5.0 + dx}};
  return s;
}

}  // namespace

TEST(GaussianIntervalMass, MatchesCdfDifference) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-6.0, 6.0);
  for (int i = 0; i < 2000; ++i) {
    double a = d(rng);
    double b = d(rng);
    if (a > b) std::swap(a, b);
    ASSERT_NEAR(gaussian_interval_mass(a, b), phi(b) - phi(a), 1e-15);
    ASSERT_EQ(gaussian_interval_mass(a, b), gaussian_interval_mass(-b, -a));
  }
}

TEST(ObserveBelief, NoLateralCue) {
  const CeiParams p;
  const Belief b = observe_belief({10, 0, kPi, 1.34}, p, {});
  ASSERT_EQ(b.points.size(), static_cast<std::size_t>(p.horizon_steps));
  for (const auto& pt : b.points) EXPECT_NEAR(pt.mean, 0.0, 1e-12);
}

TEST(ObserveBelief, HeadingCue) {
  CeiParams p;
  p.horizon_steps = 6;  // lookahead 0.5 .. 3.0 s
  const Belief b = observe_belief({10, 0, kPi - 0.1, 1.34}, p, {});
  const BeliefPoint& at3 = b.points.back();
  EXPECT_DOUBLE_EQ(at3.tau, 3.0);
  EXPECT_NEAR(at3.mean, std::sin(kPi - 0.1) * 1.34 * 3.0, 1e-12);
  EXPECT_NEAR(at3.mean, 0.401, 1e-3);
}

TEST(ObserveBelief, SigmaGrowsLinearly) {
  CeiParams p;
  const Belief b = observe_belief({10, 0, kPi, 1.34}, p, {});
  EXPECT_NEAR(b.points[7].tau, 4.0, 1e-15);
  EXPECT_NEAR(b.points[7].sigma, 0.7, 1e-12);
  for (std::size_t k = 1; k < b.points.size(); ++k) {
    EXPECT_GE(b.points[k].sigma, b.points[k - 1].sigma);
    EXPECT_GT(b.points[k].tau, b.points[k - 1].tau);
  }
}

TEST(ObserveBelief, MassOnSidewalkIsNormalised) {
  const CeiParams p;
  const SidewalkGeometry g;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> y(-0.95, 0.95);
  std::uniform_real_distribution<double> psi(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    const Belief b = observe_belief({8, y(rng), psi(rng), 1.34}, p, g);
    for (const auto& pt : b.points) {
      ASSERT_NEAR(pt.mass_on_sidewalk(-10, 10, g.half_width()), 1.0, 1e-9);
      // Split into bins and re-add.
      double sum = 0.0;
      for (double lo = -g.half_width(); lo < g.half_width() - 1e-12; lo += 0.25) {
        sum += pt.mass_on_sidewalk(lo, lo + 0.25, g.half_width());
      }
      ASSERT_NEAR(sum, 1.0, 1e-9);
      ASSERT_LE(std::abs(pt.mean), g.lateral_limit());
    }
  }
}

TEST(ObserveBelief, HeadingCueMonotone) {
  const CeiParams p;
  for (double y0 : {-0.5, 0.0, 0.5}) {
    Belief previous = observe_belief({9, y0, kPi, 1.34}, p, {});
    for (double psi = kPi - 0.05; psi >= 0.5 * kPi; psi -= 0.05) {
      const Belief b = observe_belief({9, y0, psi, 1.34}, p, {});
      for (std::size_t k = 0; k < b.points.size(); ++k) {
        ASSERT_GE(b.points[k].mean, previous.points[k].mean);
      }
      previous = b;
    }
  }
}

TEST(ObserveBelief, RejectsNonFinite) {
  EXPECT_THROW(observe_belief({NAN, 0, 0, 1}, {}, {}), std::invalid_argument);
}

TEST(PerceivedRisk, ClosedGateIsZero) {
  const SinglePoint s = single_point(0.0, 0.0, 0.5, 1.0);
  EXPECT_EQ(perceived_risk(s.plan, s.belief, {}), 0.0);
  const SinglePoint far = single_point(0.0, 0.0, 0.5, 3.5);
  EXPECT_EQ(perceived_risk(far.plan, far.belief, {}), 0.0);
}

TEST(PerceivedRisk, CentredExample) {
  const SinglePoint s = single_point(0.2, 0.2, 0.5, 0.0);
  const double risk = perceived_risk(s.plan, s.belief, {});
  EXPECT_NEAR(risk, phi(1.2) - phi(-1.2), 1e-14);
  EXPECT_NEAR(risk, 0.7699, 1e-4);
}

TEST(PerceivedRisk, DecreasesWithLateralGap) {
  double previous = 1.0;
  for (double gap = 0.0; gap < 2.0; gap += 0.05) {
    const SinglePoint s = single_point(gap, 0.0, 0.5, 0.2);
    const double r = perceived_risk(s.plan, s.belief, {});
    if (gap > 0.0) {
      ASSERT_LT(r, previous);
    }
    previous = r;
  }
}

TEST(PerceivedRisk, GateProperty) {
  const CeiParams p;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const PedestrianState self{2 + d(rng), 0.5 * d(rng), 0.1 * d(rng), 1.34, 0, 0};
    const ObservedPose other{12 + 2 * d(rng), 0.5 * d(rng), kPi + 0.1 * d(rng), 1.34};
    const Plan plan = make_plan(self, self.y, p);
    const Belief belief = observe_belief(other, p, {});
    double min_dx = 1e9;
    for (std::size_t k = 0; k < plan.points.size(); ++k) {
      min_dx = std::min(min_dx, std::abs(plan.points[k].x - belief.points[k].x_pred));
    }
    if (min_dx >= p.longitudinal_margin) {
      ASSERT_EQ(perceived_risk(plan, belief, p), 0.0);
    }
  }
}

TEST(Replan, MovesAwayFromBeliefMass) {
  const CeiParams p;
  const PedestrianState self{5, 0, 0, 1.34, 0, 0};
  // Other approaching and drifting towards +y.
  const Belief belief = observe_belief({8.5, 0.3, kPi - 0.15, 1.34}, p, {});
  const Plan current = make_plan(self, 0.0, p);
  const Plan next = replan(current, belief, self, p);
  EXPECT_LT(next.target_lateral, 0.0);
  // Brute force over the candidate set.
  double best = perceived_risk(current, belief, p);
  for (double c : p.candidate_offsets) best = std::min(best, perceived_risk(make_plan(self, c, p), belief, p));
  EXPECT_EQ(perceived_risk(next, belief, p), best);
}

TEST(Replan, FarAwayKeepsPlan) {
  const CeiParams p;
  const PedestrianState self{0.5, 0.1, 0, 1.34, 0, 0};
  const Belief belief = observe_belief({30, 0, kPi, 1.34}, p, {});
  const Plan current = make_plan(self, 0.13, p);
  EXPECT_EQ(replan(current, belief, self, p).target_lateral, 0.13);
}

TEST(Replan, SymmetricBeliefTieBreaksTowardsCurrent) {
  const CeiParams p;
  const PedestrianState self{5, 0, 0, 1.34, 0, 0};
  const Belief belief = observe_belief({8, 0, kPi, 1.34}, p, {});
  for (double current : {0.2, -0.2}) {
    const Plan next = replan(make_plan(self, current, p), belief, self, p);
    EXPECT_GT(std::abs(next.target_lateral), 0.0);
    EXPECT_EQ(std::signbit(next.target_lateral), std::signbit(current));
    const Plan mirrored = replan(make_plan(self, -current, p), belief, self, p);
    EXPECT_EQ(mirrored.target_lateral, -next.target_lateral);
  }
}

TEST(Replan, NeverIncreasesRisk) {
  const CeiParams p;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const PedestrianState self{4 + d(rng), 0.9 * d(rng), 0.3 * d(rng), 1.34, 0.3 * d(rng), 0};
    const ObservedPose other{9 + 2 * d(rng), 0.9 * d(rng), kPi + 0.4 * d(rng), 1.34};
    const Belief belief = observe_belief(other, p, {});
    const Plan current = make_plan(self, 0.95 * d(rng), p);
    const Plan next = replan(current, belief, self, p);
    ASSERT_LE(perceived_risk(next, belief, p), perceived_risk(current, belief, p));
  }
}

TEST(Replan, EmptyCandidatesThrow) {
  CeiParams p;
  p.candidate_offsets.clear();
  const PedestrianState self{};
  EXPECT_THROW(replan(make_plan(self, 0, p), Belief{}, self, p), std::invalid_argument);
}

TEST(CeiStep, ServoAtSetpoint) {
  const CeiParams p;
  const PedestrianState self{1, 0.35, 0, 1.34, 0, 0};
  // Other walks ahead in the same direction: never longitudinally co-located.
  const CeiOutput out = cei_step(self, {8, -0.5, 0, 1.34}, make_plan(self, 0.35, p), p, {});
  EXPECT_EQ(out.risk, 0.0);
  EXPECT_FALSE(out.replanned);
  EXPECT_NEAR(out.input.steering, 0.0, 1e-12);
  EXPECT_NEAR(out.input.sidestep, 0.0, 1e-12);
}

TEST(CeiStep, SidestepsTowardsTarget) {
  const CeiParams p;
  const PedestrianState self{1, 0, 0, 1.34, 0, 0};
  const CeiOutput out = cei_step(self, {14, 0.5, kPi, 1.34}, make_plan(self, -0.5, p), p, {});
  EXPECT_LT(out.input.sidestep, 0.0);
  EXPECT_LT(out.input.steering, 0.0);
}

TEST(CeiStep, ThresholdIsStrict) {
  CeiParams p;
  const PedestrianState self{5, 0, 0, 1.34, 0, 0};
  const ObservedPose other{8, 0, kPi, 1.34};
  const Plan plan = make_plan(self, 0.0, p);
  const double risk = perceived_risk(plan, observe_belief(other, p, {}), p);
  ASSERT_GT(risk, 0.0);
  p.risk_threshold = risk;
  EXPECT_FALSE(cei_step(self, other, plan, p, {}).replanned);
  p.risk_threshold = std::nextafter(risk, 0.0);
  EXPECT_TRUE(cei_step(self, other, plan, p, {}).replanned);
}

TEST(NormalizedRisk, Examples) {
  CeiParams p;
  p.risk_threshold = 0.65;
  EXPECT_EQ(normalized_risk(0.65, p), 1.0);
  EXPECT_EQ(normalized_risk(0.0, p), 0.0);
  p.risk_threshold = 0.66;
  EXPECT_NEAR(normalized_risk(0.33, p), 0.5, 1e-15);
}

TEST(CeiPair, MirroredStartsStayMirrored) {
  CeiPairConfig c;
  for (double d : {0.0, 0.05, -0.2, 0.31}) {
    const CeiPairResult r = simulate_cei_pair(c, d, -d);
    ASSERT_GT(r.steps.size(), 100u);
    for (const auto& s : r.steps) {
      ASSERT_EQ(s.a.y, -s.b.y);
      ASSERT_EQ(c.geometry.length - s.a.x, s.b.x);
      ASSERT_EQ(s.risk_a, s.risk_b);
      ASSERT_EQ(s.target_a, -s.target_b);
    }
  }
}

TEST(CeiPair, SalsaBeforeResolution) {
  CeiPairConfig c;
  c.a.risk_threshold = 0.73;
  c.b.risk_threshold = 0.76;
  const CeiPairResult r = simulate_cei_pair(c, 0.05, 0.05);
  EXPECT_FALSE(r.collision);
  EXPECT_TRUE(r.both_reached_goal);
  EXPECT_GE(count_same_side_deviations(r), 1);
}
