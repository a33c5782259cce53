#include "sidewalk/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "sidewalk/parallel.hpp"
#include "sidewalk/rng.hpp"

namespace sidewalk {

void TrainConfig::validate() const {
  if (total_episodes <= 0) throw std::invalid_argument("total_episodes must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
  if (stage_a_end < 0 || stage_b_end < stage_a_end || stage_b_end > total_episodes) {
    throw std::invalid_argument("curriculum boundaries must satisfy 0 <= A <= B <= total_episodes");
  }
  if (!std::isfinite(grad_clip)) throw std::invalid_argument("grad_clip must be finite");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (jobs <= 0) throw std::invalid_argument("jobs must be positive");
  if (initial_std > 0.0 &&
      !(initial_std > architecture.std_min && initial_std <= architecture.std_max)) {
    throw std::invalid_argument("initial_std must lie in (std_min, std_max]");
  }
  if (!(optimizer.lr > 0.0) || optimizer.weight_decay < 0.0 || !(optimizer.eps > 0.0) ||
      optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 || optimizer.beta2 < 0.0 ||
      optimizer.beta2 >= 1.0) {
    throw std::invalid_argument("invalid AdamW hyper-parameters");
  }
  architecture.validate();
}

std::vector<double> compute_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> returns(rewards.size());
  double g = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    g = rewards[i] + gamma * g;
    returns[i] = g;
  }
  return returns;
}

Stage curriculum_stage(long episode_index, const TrainConfig& config) {
  if (episode_index < config.stage_a_end) return Stage::A;
  if (episode_index < config.stage_b_end) return Stage::B;
  return Stage::C;
}

std::uint64_t episode_seed(std::uint64_t master_seed, long episode_index) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(episode_index));
}

EpisodeRecord run_policy_episode(const EnvConfig& config, const PolicyParams& params,
                                 std::uint64_t seed, bool deterministic) {
  SidewalkEnv env(config);
  std::mt19937_64 rng(derive_seed(seed, 1));
  const int in = params.architecture().input_dim;
  const int act = params.architecture().action_dim;

  EpisodeRecord rec;
  rec.stage = config.stage;
  rec.seed = seed;
  rec.observations.resize(in, config.max_steps);
  rec.actions.resize(act, config.max_steps);
  rec.rewards.reserve(static_cast<std::size_t>(config.max_steps));

  Observation obs = env.reset(seed);
  Eigen::VectorXd x(in);
  int t = 0;
  while (!env.episode_over()) {
    for (int i = 0; i < in; ++i) x(i) = obs[static_cast<std::size_t>(i)];
    const SampledAction a = sample_action(forward(params, x), rng, deterministic);
    rec.observations.col(t) = x;
    rec.actions.col(t) = a.sample;
    const StepOutcome out = env.step(a.action);
    rec.rewards.push_back(out.reward);
    rec.cause = out.cause;
    obs = out.observation;
    ++t;
  }
  rec.observations.conservativeResize(Eigen::NoChange, t);
  rec.actions.conservativeResize(Eigen::NoChange, t);
  return rec;
}

RolloutFn sidewalk_rollout(const EnvConfig& base, const TrainConfig& config) {
  EnvConfig env = base;
  env.mode = EnvMode::Training;
  env.body = RobotBody::Bicycle;
  env.risk_averse = config.risk_averse;
  env.validate();
  return [env, config](const PolicyParams& params, long index) {
    EnvConfig c = env;
    c.stage = curriculum_stage(index, config);
    return run_policy_episode(c, params, episode_seed(config.seed, index), false);
  };
}

double clip_grad_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0 && norm > max_norm) {
    grad *= max_norm / norm;
  }
  return norm;
}

Eigen::VectorXd bandit_observation(const PolicyArchitecture& arch) {
  return Eigen::VectorXd::LinSpaced(arch.input_dim, -0.5, 0.5);
}

RolloutFn bandit_rollout(const BanditConfig& bandit) {
  return [bandit](const PolicyParams& params, long index) {
    const std::uint64_t seed = episode_seed(bandit.seed, index);
    std::mt19937_64 rng(derive_seed(seed, 1));
    const Eigen::VectorXd obs = bandit_observation(params.architecture());
    const SampledAction a = sample_action(forward(params, obs), rng);
    EpisodeRecord rec;
    rec.observations = obs;
    rec.actions = a.sample;
    rec.rewards = {a.sample(0) > 0.0 ? bandit.good_reward : bandit.bad_reward};
    rec.cause = TerminationCause::Timeout;
    rec.seed = seed;
    return rec;
  };
}

double bandit_preference(const PolicyParams& params) {
  const ActionDistribution d = forward(params, bandit_observation(params.architecture()));
  return 0.5 * std::erfc(-d.mean(0) / (d.std(0) * std::numbers::sqrt2));
}

UpdateStats reinforce_update(const TrainConfig& config, const std::vector<EpisodeRecord>& batch,
                             PolicyParams& params, OptimizerState& optimizer,
                             Eigen::VectorXd* clipped_grad) {
  const std::size_t n = batch.size();
  std::vector<std::vector<double>> returns(n);
  double sum = 0.0;
  double sum_sq = 0.0;
  long count = 0;
  for (std::size_t e = 0; e < n; ++e) {
    returns[e] = compute_returns(batch[e].rewards, config.gamma);
    for (double g : returns[e]) {
      sum += g;
      ++count;
    }
  }
  // Baseline per episode step: the pooled mean, or the mean over the episodes
  // still running at that step.
  std::size_t longest = 0;
  for (const auto& r : returns) longest = std::max(longest, r.size());
  std::vector<double> baseline(longest, 0.0);
  double stddev = 1.0;
  if (config.whiten && count > 0) {
    if (config.per_step_baseline) {
      std::vector<long> active(longest, 0);
      for (const auto& r : returns) {
        for (std::size_t t = 0; t < r.size(); ++t) {
          baseline[t] += r[t];
          ++active[t];
        }
      }
      for (std::size_t t = 0; t < longest; ++t) baseline[t] /= static_cast<double>(active[t]);
    } else {
      std::fill(baseline.begin(), baseline.end(), sum / static_cast<double>(count));
    }
    for (const auto& r : returns) {
      for (std::size_t t = 0; t < r.size(); ++t) sum_sq += (r[t] - baseline[t]) * (r[t] - baseline[t]);
    }
    stddev = std::sqrt(sum_sq / static_cast<double>(count)) + 1e-8;
  }

  // Per-episode gradients are reduced in episode order so the result does not
  // depend on the number of worker threads.
  std::vector<Eigen::VectorXd> grads(n);
  std::vector<double> losses(n, 0.0);
  const double scale = 1.0 / static_cast<double>(n);
  parallel_for(static_cast<long>(n), config.jobs, [&](long i) {
    const auto e = static_cast<std::size_t>(i);
    const auto& r = returns[e];
    Eigen::VectorXd w(static_cast<Eigen::Index>(r.size()));
    for (std::size_t t = 0; t < r.size(); ++t) {
      w(static_cast<Eigen::Index>(t)) = scale * (r[t] - baseline[t]) / stddev;
    }
    grads[e] = Eigen::VectorXd::Zero(params.size());
    if (w.size() > 0) {
      losses[e] =
          accumulate_policy_gradient(params, batch[e].observations, batch[e].actions, w, grads[e]);
    }
  });

  UpdateStats stats;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
  for (std::size_t e = 0; e < n; ++e) {
    grad += grads[e];
    stats.loss += losses[e];
  }
  if (!std::isfinite(stats.loss) || !grad.allFinite()) {
    stats.loss = std::numeric_limits<double>::quiet_NaN();
    return stats;
  }
  stats.grad_norm = clip_grad_norm(grad, config.grad_clip);
  adamw_step(params.values(), grad, optimizer, config.optimizer);
  if (clipped_grad) *clipped_grad = std::move(grad);
  return stats;
}

namespace {

std::string format_log_row(const BatchLog& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%d,%d,%d,%s", b.batch, b.episodes,
                b.mean_return, b.mean_length, b.n_collisions, b.n_oob, b.n_goal,
                std::string(to_string(b.stage)).c_str());
  return buf;
}

Checkpoint make_checkpoint(const TrainConfig& config, const PolicyParams& params,
                           const OptimizerState& opt, long episodes) {
  return {params, opt, {episodes, config.seed, config.risk_averse}};
}

}  // namespace

TrainingResult run_training(const TrainConfig& config, const RolloutFn& rollout,
                            const TrainingOutputs& outputs) {
  config.validate();
  TrainingResult result{PolicyParams::initialize(config.architecture, derive_seed(config.seed, ~0ULL)),
                        {}, {}};
  result.optimizer = OptimizerState::zeros(result.params.size());
  if (config.initial_std > 0.0) {
    const PolicyArchitecture& arch = config.architecture;
    const double excess = config.initial_std - arch.std_min;
    auto head = result.params.bias(result.params.num_layers() - 1);
    head.tail(arch.action_dim).setConstant(std::log(std::expm1(excess)));
  }

  std::ofstream log_file;
  if (outputs.directory) {
    std::filesystem::create_directories(*outputs.directory);
    log_file.open(*outputs.directory / "training_log.csv", std::ios::trunc);
    if (!log_file) {
      throw std::runtime_error("cannot write " + (*outputs.directory / "training_log.csv").string());
    }
    log_file << kTrainingLogHeader << '\n';
  }

  long done = 0;
  long batch_index = 0;
  long next_checkpoint = config.checkpoint_every;
  while (done < config.total_episodes) {
    const long size = std::min<long>(config.batch_size, config.total_episodes - done);
    std::vector<EpisodeRecord> batch(static_cast<std::size_t>(size));
    const PolicyParams& frozen = result.params;
    parallel_for(size, config.jobs,
                 [&](long i) { batch[static_cast<std::size_t>(i)] = rollout(frozen, done + i); });

    BatchLog row;
    row.batch = batch_index;
    row.stage = curriculum_stage(done, config);
    for (const auto& ep : batch) {
      double total = 0.0;
      for (double r : ep.rewards) total += r;
      row.mean_return += total;
      row.mean_length += static_cast<double>(ep.rewards.size());
      row.n_collisions += ep.cause == TerminationCause::Collision;
      row.n_oob += ep.cause == TerminationCause::OutOfBounds;
      row.n_goal += ep.cause == TerminationCause::Goal;
    }
    row.mean_return /= static_cast<double>(size);
    row.mean_length /= static_cast<double>(size);

    const UpdateStats stats = reinforce_update(config, batch, result.params, result.optimizer);
    if (!std::isfinite(stats.loss)) {
      if (outputs.directory) {
        save_checkpoint(make_checkpoint(config, result.params, result.optimizer, done),
                        *outputs.directory / "diagnostic.ckpt");
      }
      throw TrainingDivergedError("non-finite policy loss in batch " +
                                  std::to_string(batch_index) + " (episodes " +
                                  std::to_string(done) + "-" + std::to_string(done + size - 1) +
                                  ")");
    }
    done += size;
    row.episodes = done;
    row.loss = stats.loss;
    row.grad_norm = stats.grad_norm;
    result.log.push_back(row);
    if (log_file) {
      log_file << format_log_row(row) << '\n';
      log_file.flush();
    }
    if (outputs.on_batch) outputs.on_batch(row);

    if (outputs.directory && config.checkpoint_every > 0 && done >= next_checkpoint &&
        done < config.total_episodes) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%06ld.ckpt", done);
      save_checkpoint(make_checkpoint(config, result.params, result.optimizer, done),
                      *outputs.directory / name);
      while (next_checkpoint <= done) next_checkpoint += config.checkpoint_every;
    }
    ++batch_index;
  }
  if (outputs.directory) {
    save_checkpoint(make_checkpoint(config, result.params, result.optimizer, done),
                    *outputs.directory / "policy.ckpt");
  }
  return result;
}

}  // namespace sidewalk
