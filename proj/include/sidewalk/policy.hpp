#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sidewalk/world.hpp"

namespace sidewalk {

// MLP: input -> [linear -> LayerNorm -> LeakyReLU] x hidden -> linear head.
// The head emits action_dim means (tanh) and action_dim standard deviations
// (softplus + std_min, capped at std_max).
struct PolicyArchitecture {
  int input_dim = 15;
  std::vector<int> hidden = {256, 256, 256};
  int action_dim = 2;
  double negative_slope = 0.01;
  double layer_norm_eps = 1e-5;
  double std_min = 0.05;
  double std_max = 1.0;

  bool operator==(const PolicyArchitecture&) const = default;
  void validate() const;
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// All parameters live in one flat vector; the accessors return views into it.
// Per hidden layer the layout is weight (row-major), bias, norm gain, norm bias;
// the head follows with weight and bias.
class PolicyParams {
 public:
  explicit PolicyParams(PolicyArchitecture arch = {});

  // Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases 0, gains 1.
  static PolicyParams initialize(const PolicyArchitecture& arch, std::uint64_t seed);

  const PolicyArchitecture& architecture() const { return arch_; }
  int num_layers() const { return static_cast<int>(arch_.hidden.size()) + 1; }
  Eigen::Index size() const { return values_.size(); }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  // layer in [0, num_layers()); the last one is the head.
  Eigen::Map<RowMajorMatrix> weight(int layer);
  Eigen::Map<const RowMajorMatrix> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  // hidden layers only
  Eigen::Map<Eigen::VectorXd> norm_gain(int layer);
  Eigen::Map<const Eigen::VectorXd> norm_gain(int layer) const;
  Eigen::Map<Eigen::VectorXd> norm_bias(int layer);
  Eigen::Map<const Eigen::VectorXd> norm_bias(int layer) const;

  int layer_inputs(int layer) const;
  int layer_outputs(int layer) const;

  // Offsets of one layer's slices within values(); gain/beta are -1 for the head.
  struct LayerSlices {
    Eigen::Index weight, bias, gain, beta;
  };
  const LayerSlices& slices(int layer) const { return offsets_.at(static_cast<std::size_t>(layer)); }

  struct Tensor {
    std::string name;
    Eigen::Index offset;
    Eigen::Index rows;
    Eigen::Index cols;
  };
  // Named slices of values(), in storage order.
  std::vector<Tensor> tensors() const;

 private:
  PolicyArchitecture arch_;
  std::vector<LayerSlices> offsets_;
  Eigen::VectorXd values_;
};

struct ActionDistribution {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

// Intermediates kept for the backward pass. Columns are samples.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> normalized;   // LayerNorm output before gain/bias
  std::vector<Eigen::RowVectorXd> inv_std;   // per sample
  std::vector<Eigen::MatrixXd> activations;  // after LeakyReLU
  Eigen::MatrixXd head;                      // raw head output
};

struct BatchDistribution {
  Eigen::MatrixXd mean;  // action_dim x T
  Eigen::MatrixXd std;   // action_dim x T
};

// obs is input_dim x T. Throws std::domain_error when the output is not finite.
BatchDistribution forward_batch(const PolicyParams& params, const Eigen::MatrixXd& obs,
                                ForwardCache* cache = nullptr);

ActionDistribution forward(const PolicyParams& params, const Eigen::VectorXd& obs);

double gaussian_log_prob(const ActionDistribution& dist, const Eigen::VectorXd& sample);

struct SampledAction {
  Eigen::VectorXd sample;  // unclipped
  RobotAction action;      // clipped to [-1, 1]
  double log_prob = 0.0;   // of the unclipped sample
};

// Draws a ~ N(mean, std) per component. With deterministic=true returns the mean.
SampledAction sample_action(const ActionDistribution& dist, std::mt19937_64& rng,
                            bool deterministic = false);

// Adds the gradient of  -sum_t weight_t * log pi(action_t | obs_t)  to grad and
// returns that loss. obs is input_dim x T, actions action_dim x T.
double accumulate_policy_gradient(const PolicyParams& params, const Eigen::MatrixXd& obs,
                                  const Eigen::MatrixXd& actions, const Eigen::VectorXd& weights,
                                  Eigen::VectorXd& grad);

// Same objective, forward only.
double policy_loss(const PolicyParams& params, const Eigen::MatrixXd& obs,
                   const Eigen::MatrixXd& actions, const Eigen::VectorXd& weights);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimizerState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  static OptimizerState zeros(Eigen::Index n);
};

// Decoupled weight decay; the decay term uses the weights before the update.
void adamw_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, OptimizerState& state,
                const AdamWConfig& config);

}  // namespace sidewalk
