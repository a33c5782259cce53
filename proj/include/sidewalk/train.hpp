#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sidewalk/checkpoint.hpp"
#include "sidewalk/env.hpp"
#include "sidewalk/policy.hpp"

namespace sidewalk {

struct TrainConfig {
  long total_episodes = 12000;
  int batch_size = 20;
  double gamma = 0.99;
  long stage_a_end = 1000;  // episodes [0, stage_a_end) have no pedestrian
  long stage_b_end = 2000;  // [stage_a_end, stage_b_end) stationary pedestrian
  bool whiten = true;       // batch-whitened returns as advantages
  // Subtract the mean return of the batch's episodes at the same step instead
  // of one pooled mean. Only used when whiten is set.
  bool per_step_baseline = true;
  double grad_clip = 5.0;   // global norm; <= 0 disables
  std::uint64_t seed = 0;
  bool risk_averse = false;
  long checkpoint_every = 1000;  // episodes; 0 disables periodic checkpoints
  int jobs = 1;
  // Initial action std; the std head bias starts at softplus^-1(initial_std - std_min).
  // Non-positive keeps the zero bias (std = softplus(0) + std_min).
  double initial_std = 0.4;
  AdamWConfig optimizer{.lr = 5e-5};
  // The higher std floor keeps exploring after the policy has converged.
  PolicyArchitecture architecture{.std_min = 0.2};

  void validate() const;
};

// G_t = r_t + gamma * G_{t+1}, computed backward.
std::vector<double> compute_returns(const std::vector<double>& rewards, double gamma);

Stage curriculum_stage(long episode_index, const TrainConfig& config);

// Per-episode seed; the env is reset with it and the action sampler uses
// derive_seed(episode_seed, 1).
std::uint64_t episode_seed(std::uint64_t master_seed, long episode_index);

struct EpisodeRecord {
  Eigen::MatrixXd observations;  // input_dim x T
  Eigen::MatrixXd actions;       // action_dim x T, unclipped samples
  std::vector<double> rewards;
  TerminationCause cause = TerminationCause::None;
  Stage stage = Stage::C;
  std::uint64_t seed = 0;
};

// Produces one episode for the given index with the (read-only) parameters.
// Must be a pure function of its arguments so rollouts may run in parallel.
using RolloutFn = std::function<EpisodeRecord(const PolicyParams&, long episode_index)>;

// Sidewalk rollout with sampled (deterministic=false) or mean actions.
EpisodeRecord run_policy_episode(const EnvConfig& config, const PolicyParams& params,
                                 std::uint64_t seed, bool deterministic);

RolloutFn sidewalk_rollout(const EnvConfig& base, const TrainConfig& config);

// Two-armed bandit: one-step episodes from a fixed observation. The arm is the
// sign of the first action component; a positive value pulls the good arm.
struct BanditConfig {
  double good_reward = 1.0;
  double bad_reward = 0.2;
  std::uint64_t seed = 0;
};

Eigen::VectorXd bandit_observation(const PolicyArchitecture& arch);
RolloutFn bandit_rollout(const BanditConfig& bandit);
// Probability that the policy pulls the good arm.
double bandit_preference(const PolicyParams& params);

struct BatchLog {
  long batch = 0;
  long episodes = 0;  // cumulative after this batch
  double mean_return = 0.0;
  double mean_length = 0.0;
  int n_collisions = 0;
  int n_oob = 0;
  int n_goal = 0;
  Stage stage = Stage::A;
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
};

struct TrainingOutputs {
  std::optional<std::filesystem::path> directory;  // checkpoints and training_log.csv
  std::function<void(const BatchLog&)> on_batch;
};

struct TrainingResult {
  PolicyParams params;
  OptimizerState optimizer;
  std::vector<BatchLog> log;
};

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// REINFORCE over config.total_episodes episodes in batches. Throws
// TrainingDivergedError (after writing diagnostic.ckpt) on a non-finite loss.
TrainingResult run_training(const TrainConfig& config, const RolloutFn& rollout,
                            const TrainingOutputs& outputs = {});

// Batch step shared by run_training; returns loss and pre-clip gradient norm.
struct UpdateStats {
  double loss = 0.0;
  double grad_norm = 0.0;
};
UpdateStats reinforce_update(const TrainConfig& config, const std::vector<EpisodeRecord>& batch,
                             PolicyParams& params, OptimizerState& optimizer,
                             Eigen::VectorXd* clipped_grad = nullptr);

// Scales grad in place so its norm is at most max_norm; returns the original norm.
double clip_grad_norm(Eigen::VectorXd& grad, double max_norm);

inline constexpr const char* kTrainingLogHeader =
    "batch,episodes,mean_return,mean_length,n_collisions,n_oob,n_goal,stage";

}  // namespace sidewalk
