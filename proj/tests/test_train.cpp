#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "sidewalk/rng.hpp"
#include "sidewalk/train.hpp"

using namespace sidewalk;
namespace fs = std::filesystem;

namespace {

TrainConfig bandit_config(std::uint64_t seed, long episodes) {
  TrainConfig c;
  c.total_episodes = episodes;
  c.stage_a_end = 0;
  c.stage_b_end = 0;
  c.seed = seed;
  c.checkpoint_every = 0;
  return c;
}

// Short empty-sidewalk episodes keep the end-to-end tests fast.
RolloutFn short_rollout(const TrainConfig& config) {
  EnvConfig env;
  env.max_steps = 15;
  return sidewalk_rollout(env, config);
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sidewalk_train_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Returns, Examples) {
  const std::vector<double> g = compute_returns({1, 1, 1}, 0.99);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_NEAR(g[0], 2.9701, 1e-12);
  EXPECT_NEAR(g[1], 1.99, 1e-12);
  EXPECT_EQ(g[2], 1.0);
  EXPECT_EQ(compute_returns({0.5, -2, 3}, 0.0), (std::vector<double>{0.5, -2, 3}));
  EXPECT_EQ(compute_returns({0, 0, 0, 0}, 0.99), (std::vector<double>(4, 0.0)));
  EXPECT_TRUE(compute_returns({}, 0.99).empty());
}

TEST(Curriculum, Boundaries) {
  const TrainConfig c;
  EXPECT_EQ(curriculum_stage(0, c), Stage::A);
  EXPECT_EQ(curriculum_stage(999, c), Stage::A);
  EXPECT_EQ(curriculum_stage(1000, c), Stage::B);
  EXPECT_EQ(curriculum_stage(1500, c), Stage::B);
  EXPECT_EQ(curriculum_stage(2000, c), Stage::C);
  EXPECT_EQ(curriculum_stage(11999, c), Stage::C);
}

TEST(Config, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.stage_b_end = c.total_episodes + 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.total_episodes = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(EpisodeSeeds, DistinctAndStable) {
  EXPECT_EQ(episode_seed(5, 17), episode_seed(5, 17));
  EXPECT_NE(episode_seed(5, 17), episode_seed(5, 18));
  EXPECT_NE(episode_seed(5, 17), episode_seed(6, 17));
}

TEST(Bandit, PrefersBetterArm) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    BanditConfig bandit;
    bandit.seed = seed;
    const TrainingResult r = run_training(bandit_config(seed, 2000), bandit_rollout(bandit));
    EXPECT_GE(bandit_preference(r.params), 0.95) << "seed " << seed;
  }
}

TEST(Bandit, UnwhitenedGradientPointsToBetterArm) {
  TrainConfig config = bandit_config(3, 1);
  config.whiten = false;
  config.grad_clip = 0.0;
  BanditConfig bandit;
  bandit.seed = 99;
  const RolloutFn rollout = bandit_rollout(bandit);
  const PolicyParams params =
      PolicyParams::initialize(config.architecture, derive_seed(config.seed, ~0ULL));

  Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(params.size());
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    PolicyParams scratch_params = params;
    OptimizerState opt = OptimizerState::zeros(params.size());
    Eigen::VectorXd g;
    reinforce_update(config, {rollout(params, i)}, scratch_params, opt, &g);
    mean_grad += g / n;
  }
  // Descending the mean loss gradient must raise the good-arm probability.
  PolicyParams stepped = params;
  stepped.values() -= 1e-3 * mean_grad / mean_grad.norm();
  EXPECT_GT(bandit_preference(stepped), bandit_preference(params));
}

TEST(Update, ClippedNormBounded) {
  TrainConfig config = bandit_config(4, 20);
  config.grad_clip = 0.01;
  const RolloutFn rollout = short_rollout(config);
  PolicyParams params = PolicyParams::initialize(config.architecture, 4);
  OptimizerState opt = OptimizerState::zeros(params.size());
  std::vector<EpisodeRecord> batch;
  for (long i = 0; i < 4; ++i) batch.push_back(rollout(params, i));
  Eigen::VectorXd g;
  const UpdateStats stats = reinforce_update(config, batch, params, opt, &g);
  EXPECT_GT(stats.grad_norm, config.grad_clip);
  EXPECT_LE(g.norm(), config.grad_clip * (1 + 1e-12));

  Eigen::VectorXd v = Eigen::VectorXd::Constant(4, 3.0);
  EXPECT_EQ(clip_grad_norm(v, 1.0), 6.0);
  EXPECT_NEAR(v.norm(), 1.0, 1e-15);
}

TEST(Update, DuplicatedBatchGivesSameGradient) {
  for (bool per_step : {true, false}) {
    TrainConfig config = bandit_config(5, 20);
    config.grad_clip = 0.0;
    config.per_step_baseline = per_step;
    const RolloutFn rollout = short_rollout(config);
    const PolicyParams params = PolicyParams::initialize(config.architecture, 5);
    std::vector<EpisodeRecord> batch;
    for (long i = 0; i < 3; ++i) batch.push_back(rollout(params, i));
    std::vector<EpisodeRecord> doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());

    PolicyParams p1 = params, p2 = params;
    OptimizerState o1 = OptimizerState::zeros(params.size()), o2 = o1;
    Eigen::VectorXd g1, g2;
    reinforce_update(config, batch, p1, o1, &g1);
    reinforce_update(config, doubled, p2, o2, &g2);
    EXPECT_LE((g1 - g2).norm(), 1e-12 * g1.norm());
  }
}

TEST(Update, JobsDoNotChangeTheStep) {
  TrainConfig config = bandit_config(6, 20);
  const RolloutFn rollout = short_rollout(config);
  const PolicyParams params = PolicyParams::initialize(config.architecture, 6);
  std::vector<EpisodeRecord> batch;
  for (long i = 0; i < 5; ++i) batch.push_back(rollout(params, i));
  PolicyParams serial = params, threaded = params;
  OptimizerState o1 = OptimizerState::zeros(params.size()), o2 = o1;
  reinforce_update(config, batch, serial, o1);
  config.jobs = 3;
  reinforce_update(config, batch, threaded, o2);
  EXPECT_TRUE(bitwise_equal(serial.values(), threaded.values()));
}

TEST(Training, SerialRunsAreBitIdentical) {
  TrainConfig config = bandit_config(7, 60);
  config.stage_a_end = 20;
  config.stage_b_end = 40;
  config.batch_size = 10;
  const TrainingResult a = run_training(config, short_rollout(config));
  const TrainingResult b = run_training(config, short_rollout(config));
  EXPECT_TRUE(bitwise_equal(a.params.values(), b.params.values()));
  config.jobs = 4;
  const TrainingResult c = run_training(config, short_rollout(config));
  EXPECT_TRUE(bitwise_equal(a.params.values(), c.params.values()));
  ASSERT_EQ(a.log.size(), 6u);
  EXPECT_EQ(a.log[0].stage, Stage::A);
  EXPECT_EQ(a.log[2].stage, Stage::B);
  EXPECT_EQ(a.log[5].stage, Stage::C);
  EXPECT_EQ(a.log[5].episodes, 60);
}

TEST(Training, RolloutsReplayFromLoggedSeeds) {
  TrainConfig config = bandit_config(8, 10);
  const RolloutFn rollout = short_rollout(config);
  const PolicyParams params = PolicyParams::initialize(config.architecture, 1);
  const EpisodeRecord first = rollout(params, 3);
  const EpisodeRecord again = rollout(params, 3);
  EXPECT_EQ(first.seed, episode_seed(8, 3));
  EXPECT_EQ(first.rewards, again.rewards);
  EXPECT_EQ(first.actions, again.actions);
}

TEST(Training, WritesLogAndCheckpoints) {
  const fs::path dir = scratch("outputs");
  TrainConfig config = bandit_config(9, 40);
  config.batch_size = 10;
  config.checkpoint_every = 20;
  TrainingOutputs outputs;
  outputs.directory = dir;
  int callbacks = 0;
  outputs.on_batch = [&](const BatchLog&) { ++callbacks; };
  const TrainingResult r = run_training(config, short_rollout(config), outputs);
  EXPECT_EQ(callbacks, 4);
  EXPECT_TRUE(fs::exists(dir / "checkpoint_000020.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "policy.ckpt"));

  std::ifstream log(dir / "training_log.csv");
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, kTrainingLogHeader);
  int rows = 0;
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, 4);

  const Checkpoint saved = load_checkpoint(dir / "policy.ckpt", config.architecture);
  EXPECT_TRUE(bitwise_equal(saved.params.values(), r.params.values()));
  EXPECT_EQ(saved.metadata.episodes, 40);
  EXPECT_EQ(saved.metadata.seed, 9u);
  fs::remove_all(dir);
}

TEST(Training, NonFiniteLossAborts) {
  const fs::path dir = scratch("diverged");
  TrainConfig config = bandit_config(10, 40);
  config.batch_size = 10;
  RolloutFn bad = [](const PolicyParams& params, long index) {
    BanditConfig b;
    EpisodeRecord rec = bandit_rollout(b)(params, index);
    if (index >= 10) rec.rewards[0] = std::numeric_limits<double>::quiet_NaN();
    return rec;
  };
  TrainingOutputs outputs;
  outputs.directory = dir;
  EXPECT_THROW(run_training(config, bad, outputs), TrainingDivergedError);
  EXPECT_TRUE(fs::exists(dir / "diagnostic.ckpt"));
  fs::remove_all(dir);
}
