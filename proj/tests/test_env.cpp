#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "sidewalk/env.hpp"

using namespace sidewalk;

namespace {

EnvConfig config_for(Stage stage, EnvMode mode = EnvMode::Training) {
  EnvConfig c;
  c.stage = stage;
  c.mode = mode;
  return c;
}

Spawn mirrored(Spawn s) {
  s.pedestrian_dy = -s.pedestrian_dy;
  s.robot_dy = -s.robot_dy;
  return s;
}

}  // namespace

TEST(Observation, RobotAtNominalSpawn) {
  SidewalkEnv env(config_for(Stage::C));
  const Observation o = env.reset(Spawn{});
  EXPECT_EQ(o[0], 1.0);
  EXPECT_EQ(o[1], 0.0);
  EXPECT_EQ(o[2], 0.0);
  EXPECT_EQ(o[3], -1.0);
  EXPECT_NEAR(o[4], 0.536, 1e-15);
  EXPECT_EQ(o[5], 0.0);
  // pedestrian at the origin walking at 1.34 m/s
  EXPECT_EQ(o[6], 0.0);
  EXPECT_EQ(o[9], 1.0);
  EXPECT_NEAR(o[10], 0.536, 1e-15);
}

TEST(Observation, StageAZeroFillsPedestrian) {
  SidewalkEnv env(config_for(Stage::A));
  env.reset(3);
  const StepOutcome out = env.step({0.5, 0.2});
  for (int i = 6; i <= 12; ++i) EXPECT_EQ(out.observation[static_cast<std::size_t>(i)], 0.0) << i;
}

TEST(Observation, PreviousActionPropagates) {
  SidewalkEnv env(config_for(Stage::B));
  const Observation first = env.reset(4);
  EXPECT_EQ(first[13], 0.0);
  EXPECT_EQ(first[14], 0.0);
  const StepOutcome out = env.step({0.3, -0.2});
  EXPECT_EQ(out.observation[13], 0.3);
  EXPECT_EQ(out.observation[14], -0.2);
  // stored after clipping
  const StepOutcome clipped = env.step({1.7, -4.0});
  EXPECT_EQ(clipped.observation[13], 1.0);
  EXPECT_EQ(clipped.observation[14], -1.0);
}

TEST(Observation, AlwaysFinite) {
  SidewalkEnv env(config_for(Stage::C));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Observation o = env.reset(seed);
    while (!env.episode_over()) {
      for (double v : o) ASSERT_TRUE(std::isfinite(v));
      o = env.step({u(rng), u(rng)}).observation;
    }
  }
}

TEST(Reward, ProgressAtDesiredSpeed) {
  const EnvConfig c = config_for(Stage::A);
  SidewalkEnv env(c);
  env.reset(Spawn{});
  const StepOutcome out = env.step({0.0, 0.0});
  EXPECT_NEAR(out.reward, c.weights.progress * c.robot.desired_speed * c.dt, 1e-12);
  EXPECT_GT(out.reward, 0.0);
  EXPECT_FALSE(out.terminated);
  EXPECT_EQ(out.cause, TerminationCause::None);
}

TEST(Reward, CollisionWithStationaryPedestrian) {
  SidewalkEnv env(config_for(Stage::B));
  Spawn s;
  s.pedestrian_dx = 14.6;
  env.reset(s);
  const StepOutcome out = env.step({0.0, 0.0});
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.cause, TerminationCause::Collision);
  EXPECT_NEAR(out.reward, 0.067 - 50.0, 1e-9);
}

TEST(Reward, GoalLine) {
  SidewalkEnv env(config_for(Stage::A));
  Spawn s;
  s.robot_dx = -14.46;
  env.reset(s);
  const StepOutcome out = env.step({0.0, 0.0});
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.cause, TerminationCause::Goal);
  EXPECT_NEAR(out.reward, 0.067 + 20.0, 1e-9);
}

TEST(Reward, OutOfBounds) {
  SidewalkEnv env(config_for(Stage::A));
  Spawn s;
  s.robot_dy = 0.9;
  env.reset(s);
  StepOutcome out;
  while (!env.episode_over()) out = env.step({0.0, -1.0});
  EXPECT_EQ(out.cause, TerminationCause::OutOfBounds);
  EXPECT_TRUE(out.terminated);
  EXPECT_LT(out.reward, -49.0);
}

TEST(Reward, RiskPenaltyOnlyForRiskAverse) {
  EnvConfig plain = config_for(Stage::C);
  EnvConfig averse = plain;
  averse.risk_averse = true;
  SidewalkEnv a(plain), b(averse);
  a.reset(9);
  b.reset(9);
  bool saw_risk = false;
  while (!a.episode_over()) {
    const StepOutcome x = a.step({0.0, 0.0});
    const StepOutcome y = b.step({0.0, 0.0});
    ASSERT_EQ(x.info.risk, y.info.risk);
    ASSERT_NEAR(x.reward - y.reward, plain.weights.risk * x.info.risk * plain.dt, 1e-12);
    saw_risk |= x.info.risk > 0.0;
  }
  EXPECT_TRUE(saw_risk);
}

TEST(Reward, BoundedPerStep) {
  EnvConfig c = config_for(Stage::C);
  c.risk_averse = true;
  const double bound = reward_bound(c);
  SidewalkEnv env(c);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    env.reset(seed);
    while (!env.episode_over()) ASSERT_LE(std::abs(env.step({u(rng), u(rng)}).reward), bound);
  }
}

TEST(Reset, ThresholdAndOffsetRanges) {
  SidewalkEnv train(config_for(Stage::C));
  SidewalkEnv eval(config_for(Stage::C, EnvMode::Evaluation));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    train.reset(seed);
    ASSERT_GE(train.risk_threshold(), 0.6);
    ASSERT_LE(train.risk_threshold(), 0.9);
    ASSERT_LE(std::abs(train.robot().x - 15.0), 0.4);
    ASSERT_LE(std::abs(train.pedestrian().y), 0.4);

    eval.reset(seed);
    ASSERT_GE(eval.risk_threshold(), 0.6);
    ASSERT_LE(eval.risk_threshold(), 0.7);
    ASSERT_LE(std::abs(eval.robot().x - 15.0), 0.1);
    ASSERT_LE(std::abs(eval.robot().y), 0.1);
    ASSERT_LE(std::abs(eval.pedestrian().x), 0.1);
    ASSERT_LE(std::abs(eval.pedestrian().y), 0.1);
  }
}

TEST(Reset, StagesControlThePedestrian) {
  SidewalkEnv a(config_for(Stage::A));
  a.reset(1);
  EXPECT_FALSE(a.has_pedestrian());

  SidewalkEnv b(config_for(Stage::B));
  b.reset(1);
  const PedestrianState start = b.pedestrian();
  for (int i = 0; i < 20; ++i) b.step({0.0, 0.0});
  EXPECT_EQ(b.pedestrian().x, start.x);
  EXPECT_EQ(b.pedestrian().y, start.y);

  SidewalkEnv c(config_for(Stage::C));
  c.reset(1);
  const double x0 = c.pedestrian().x;
  c.step({0.0, 0.0});
  EXPECT_GT(c.pedestrian().x, x0);
}

TEST(Episode, SameSeedIsBitIdentical) {
  SidewalkEnv a(config_for(Stage::C));
  SidewalkEnv b(config_for(Stage::C));
  const Observation oa = a.reset(77);
  const Observation ob = b.reset(77);
  ASSERT_EQ(oa, ob);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (!a.episode_over()) {
    const RobotAction act{u(rng), u(rng)};
    const StepOutcome x = a.step(act);
    const StepOutcome y = b.step(act);
    ASSERT_EQ(x.observation, y.observation);
    ASSERT_EQ(x.reward, y.reward);
    ASSERT_EQ(x.cause, y.cause);
  }
  EXPECT_TRUE(b.episode_over());
}

TEST(Episode, EndsWithinMaxSteps) {
  EnvConfig c = config_for(Stage::A);
  c.max_steps = 50;
  SidewalkEnv env(c);
  env.reset(2);
  StepOutcome out;
  int n = 0;
  while (!env.episode_over()) {
    out = env.step({-1.0, 0.0});
    ++n;
  }
  EXPECT_EQ(n, 50);
  EXPECT_TRUE(out.truncated);
  EXPECT_FALSE(out.terminated);
  EXPECT_EQ(out.cause, TerminationCause::Timeout);
  EXPECT_THROW(env.step({0.0, 0.0}), std::logic_error);
}

TEST(Episode, StepBeforeResetThrows) {
  SidewalkEnv env(config_for(Stage::A));
  EXPECT_THROW(env.step({0.0, 0.0}), std::logic_error);
}

TEST(Episode, MirrorSymmetry) {
  for (Stage stage : {Stage::B, Stage::C}) {
    SidewalkEnv env(config_for(stage));
    SidewalkEnv mirror(config_for(stage));
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Spawn s = env.sample_spawn(seed);
      env.reset(s);
      mirror.reset(mirrored(s));
      while (!env.episode_over()) {
        const RobotAction act{u(rng), 0.3 * u(rng)};
        const StepOutcome x = env.step(act);
        const StepOutcome y = mirror.step({act.accel, -act.steer});
        ASSERT_EQ(x.reward, y.reward);
        ASSERT_EQ(x.cause, y.cause);
        ASSERT_EQ(x.info.risk, y.info.risk);
        for (std::size_t i : {0u, 3u, 4u, 6u, 9u, 10u, 13u}) ASSERT_EQ(x.observation[i], y.observation[i]);
        for (std::size_t i : {1u, 2u, 5u, 7u, 8u, 11u, 12u, 14u}) {
          ASSERT_EQ(x.observation[i], -y.observation[i]) << "slot " << i;
        }
      }
      ASSERT_TRUE(mirror.episode_over());
    }
  }
}

TEST(Config, Validation) {
  EnvConfig c;
  c.max_steps = 0;
  EXPECT_THROW(SidewalkEnv{c}, std::invalid_argument);
  c = EnvConfig{};
  c.threshold_range = {0.9, 0.6};
  EXPECT_THROW(SidewalkEnv{c}, std::invalid_argument);
}
