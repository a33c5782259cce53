#include "sidewalk/policy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sidewalk {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Eigen::Map<RowMajorMatrix> matrix_view(VectorXd& v, Index offset, Index rows, Index cols) {
  return {v.data() + offset, rows, cols};
}

Eigen::Map<VectorXd> vector_view(VectorXd& v, Index offset, Index n) {
  return {v.data() + offset, n};
}

struct HeadTerms {
  MatrixXd mean;
  MatrixXd std;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> std_capped;
};

HeadTerms head_terms(const PolicyArchitecture& arch, const MatrixXd& head) {
  const Index a = arch.action_dim;
  HeadTerms h;
  // tanh rounds to exactly +-1 for large inputs; keep the mean strictly inside.
  const double limit = std::nextafter(1.0, 0.0);
  h.mean = head.topRows(a).array().tanh().cwiseMax(-limit).cwiseMin(limit).matrix();
  h.std.resize(a, head.cols());
  h.std_capped.resize(a, head.cols());
  for (Index t = 0; t < head.cols(); ++t) {
    for (Index i = 0; i < a; ++i) {
      const double s = softplus(head(a + i, t)) + arch.std_min;
      h.std_capped(i, t) = s > arch.std_max;
      h.std(i, t) = h.std_capped(i, t) ? arch.std_max : s;
    }
  }
  return h;
}

// -sum_t w_t log N(actions_t; mean_t, std_t)
double weighted_nll(const HeadTerms& h, const MatrixXd& actions, const VectorXd& weights) {
  double loss = 0.0;
  for (Index t = 0; t < actions.cols(); ++t) {
    double log_prob = 0.0;
    for (Index i = 0; i < actions.rows(); ++i) {
      const double z = (actions(i, t) - h.mean(i, t)) / h.std(i, t);
      log_prob += -0.5 * z * z - std::log(h.std(i, t)) - kHalfLog2Pi;
    }
    loss -= weights(t) * log_prob;
  }
  return loss;
}

void check_batch(const PolicyParams& params, const MatrixXd& obs, const MatrixXd& actions,
                 const VectorXd& weights) {
  const PolicyArchitecture& arch = params.architecture();
  if (obs.rows() != arch.input_dim || actions.rows() != arch.action_dim ||
      actions.cols() != obs.cols() || weights.size() != obs.cols()) {
    throw std::invalid_argument("policy gradient: batch shapes do not match the architecture");
  }
}

}  // namespace

void PolicyArchitecture::validate() const {
  if (input_dim <= 0 || action_dim <= 0 || hidden.empty()) {
    throw std::invalid_argument("policy architecture: empty layer");
  }
  for (int h : hidden) {
    if (h <= 1) {
      throw std::invalid_argument("policy architecture: hidden layers need at least 2 units");
    }
  }
  if (!(std_min > 0.0) || !(std_max > std_min) || !(layer_norm_eps > 0.0) ||
      negative_slope < 0.0) {
    throw std::invalid_argument("policy architecture: invalid head or activation constants");
  }
}

PolicyParams::PolicyParams(PolicyArchitecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  Index offset = 0;
  int fan_in = arch_.input_dim;
  for (int width : arch_.hidden) {
    LayerSlices s;
    s.weight = offset;
    offset += static_cast<Index>(width) * fan_in;
    s.bias = offset;
    offset += width;
    s.gain = offset;
    offset += width;
    s.beta = offset;
    offset += width;
    offsets_.push_back(s);
    fan_in = width;
  }
  LayerSlices head{offset, 0, -1, -1};
  offset += static_cast<Index>(2 * arch_.action_dim) * fan_in;
  head.bias = offset;
  offset += 2 * arch_.action_dim;
  offsets_.push_back(head);

  values_ = VectorXd::Zero(offset);
  for (int l = 0; l + 1 < num_layers(); ++l) {
    norm_gain(l).setOnes();
  }
}

PolicyParams PolicyParams::initialize(const PolicyArchitecture& arch, std::uint64_t seed) {
  PolicyParams p(arch);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < p.num_layers(); ++l) {
    const double bound = std::sqrt(1.0 / p.layer_inputs(l));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = p.weight(l);
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) {
        w(r, c) = dist(rng);
      }
    }
  }
  return p;
}

int PolicyParams::layer_inputs(int layer) const {
  return layer == 0 ? arch_.input_dim : arch_.hidden.at(static_cast<std::size_t>(layer - 1));
}

int PolicyParams::layer_outputs(int layer) const {
  return layer + 1 == num_layers() ? 2 * arch_.action_dim
                                   : arch_.hidden.at(static_cast<std::size_t>(layer));
}

Eigen::Map<RowMajorMatrix> PolicyParams::weight(int layer) {
  return {values_.data() + slices(layer).weight, layer_outputs(layer), layer_inputs(layer)};
}
Eigen::Map<const RowMajorMatrix> PolicyParams::weight(int layer) const {
  return {values_.data() + slices(layer).weight, layer_outputs(layer), layer_inputs(layer)};
}
Eigen::Map<VectorXd> PolicyParams::bias(int layer) {
  return {values_.data() + slices(layer).bias, layer_outputs(layer)};
}
Eigen::Map<const VectorXd> PolicyParams::bias(int layer) const {
  return {values_.data() + slices(layer).bias, layer_outputs(layer)};
}
Eigen::Map<VectorXd> PolicyParams::norm_gain(int layer) {
  return {values_.data() + slices(layer).gain, layer_outputs(layer)};
}
Eigen::Map<const VectorXd> PolicyParams::norm_gain(int layer) const {
  return {values_.data() + slices(layer).gain, layer_outputs(layer)};
}
Eigen::Map<VectorXd> PolicyParams::norm_bias(int layer) {
  return {values_.data() + slices(layer).beta, layer_outputs(layer)};
}
Eigen::Map<const VectorXd> PolicyParams::norm_bias(int layer) const {
  return {values_.data() + slices(layer).beta, layer_outputs(layer)};
}

std::vector<PolicyParams::Tensor> PolicyParams::tensors() const {
  std::vector<Tensor> out;
  for (int l = 0; l < num_layers(); ++l) {
    const bool head = l + 1 == num_layers();
    const std::string prefix = head ? "head" : "hidden." + std::to_string(l);
    const LayerSlices& s = slices(l);
    out.push_back({prefix + ".weight", s.weight, layer_outputs(l), layer_inputs(l)});
    out.push_back({prefix + ".bias", s.bias, layer_outputs(l), 1});
    if (!head) {
      out.push_back({prefix + ".norm_gain", s.gain, layer_outputs(l), 1});
      out.push_back({prefix + ".norm_bias", s.beta, layer_outputs(l), 1});
    }
  }
  return out;
}

BatchDistribution forward_batch(const PolicyParams& params, const MatrixXd& obs,
                                ForwardCache* cache) {
  const PolicyArchitecture& arch = params.architecture();
  if (obs.rows() != arch.input_dim) {
    throw std::invalid_argument("policy forward: observation size does not match the architecture");
  }
  const int hidden_layers = params.num_layers() - 1;
  if (cache) {
    cache->input = obs;
    cache->normalized.resize(static_cast<std::size_t>(hidden_layers));
    cache->inv_std.resize(static_cast<std::size_t>(hidden_layers));
    cache->activations.resize(static_cast<std::size_t>(hidden_layers));
  }

  MatrixXd h = obs;
  for (int l = 0; l < hidden_layers; ++l) {
    MatrixXd z = params.weight(l) * h;
    z.colwise() += params.bias(l);
    const Eigen::RowVectorXd mu = z.colwise().mean();
    z.rowwise() -= mu;
    const Eigen::RowVectorXd var = z.array().square().colwise().mean();
    const Eigen::RowVectorXd inv = (var.array() + arch.layer_norm_eps).rsqrt();
    z.array().rowwise() *= inv.array();  // z now holds the normalised activations

    MatrixXd y = (z.array().colwise() * params.norm_gain(l).array()).colwise() +
                 params.norm_bias(l).array();
    const double slope = arch.negative_slope;
    y = y.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    if (cache) {
      cache->normalized[static_cast<std::size_t>(l)] = std::move(z);
      cache->inv_std[static_cast<std::size_t>(l)] = inv;
      cache->activations[static_cast<std::size_t>(l)] = y;
    }
    h = std::move(y);
  }
  MatrixXd head = params.weight(hidden_layers) * h;
  head.colwise() += params.bias(hidden_layers);
  if (!head.allFinite()) {
    throw std::domain_error("policy forward: non-finite output");
  }
  HeadTerms terms = head_terms(arch, head);
  if (cache) {
    cache->head = std::move(head);
  }
  return {std::move(terms.mean), std::move(terms.std)};
}

ActionDistribution forward(const PolicyParams& params, const VectorXd& obs) {
  BatchDistribution b = forward_batch(params, obs);
  return {b.mean.col(0), b.std.col(0)};
}

double gaussian_log_prob(const ActionDistribution& dist, const VectorXd& sample) {
  double log_prob = 0.0;
  for (Index i = 0; i < sample.size(); ++i) {
    const double z = (sample(i) - dist.mean(i)) / dist.std(i);
    log_prob += -0.5 * z * z - std::log(dist.std(i)) - kHalfLog2Pi;
  }
  return log_prob;
}

SampledAction sample_action(const ActionDistribution& dist, std::mt19937_64& rng,
                            bool deterministic) {
  SampledAction out;
  out.sample = dist.mean;
  if (!deterministic) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < dist.mean.size(); ++i) {
      out.sample(i) = dist.mean(i) + dist.std(i) * normal(rng);
    }
  }
  out.log_prob = gaussian_log_prob(dist, out.sample);
  out.action = clip_action({out.sample(0), out.sample.size() > 1 ? out.sample(1) : 0.0});
  return out;
}

double policy_loss(const PolicyParams& params, const MatrixXd& obs, const MatrixXd& actions,
                   const VectorXd& weights) {
  check_batch(params, obs, actions, weights);
  ForwardCache cache;
  forward_batch(params, obs, &cache);
  return weighted_nll(head_terms(params.architecture(), cache.head), actions, weights);
}

double accumulate_policy_gradient(const PolicyParams& params, const MatrixXd& obs,
                                  const MatrixXd& actions, const VectorXd& weights,
                                  VectorXd& grad) {
  check_batch(params, obs, actions, weights);
  if (grad.size() != params.size()) {
    throw std::invalid_argument("policy gradient: gradient vector has the wrong size");
  }
  const PolicyArchitecture& arch = params.architecture();
  const Index a = arch.action_dim;
  const Index T = obs.cols();

  ForwardCache cache;
  forward_batch(params, obs, &cache);
  const HeadTerms h = head_terms(arch, cache.head);
  const double loss = weighted_nll(h, actions, weights);

  // Gradient of the loss with respect to the raw head output.
  MatrixXd d_head(2 * a, T);
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < a; ++i) {
      const double m = h.mean(i, t);
      const double s = h.std(i, t);
      const double diff = actions(i, t) - m;
      const double z = diff / s;
      const double d_mean = -weights(t) * diff / (s * s);
      const double d_std = -weights(t) * (z * z - 1.0) / s;
      d_head(i, t) = d_mean * (1.0 - m * m);
      d_head(a + i, t) = h.std_capped(i, t) ? 0.0 : d_std * sigmoid(cache.head(a + i, t));
    }
  }

  const int hidden_layers = params.num_layers() - 1;
  {
    const auto& s = params.slices(hidden_layers);
    const MatrixXd& input = cache.activations.back();
    matrix_view(grad, s.weight, 2 * a, input.rows()).noalias() += d_head * input.transpose();
    vector_view(grad, s.bias, 2 * a) += d_head.rowwise().sum();
  }
  MatrixXd d_act = params.weight(hidden_layers).transpose() * d_head;

  for (int l = hidden_layers - 1; l >= 0; --l) {
    const auto idx = static_cast<std::size_t>(l);
    const auto& s = params.slices(l);
    const MatrixXd& act = cache.activations[idx];
    const MatrixXd& xhat = cache.normalized[idx];
    const Eigen::RowVectorXd& inv = cache.inv_std[idx];
    const Index n = act.rows();
    const double slope = arch.negative_slope;

    const MatrixXd d_y =
        (act.array() > 0.0).select(d_act.array(), slope * d_act.array()).matrix();
    vector_view(grad, s.gain, n) += (d_y.array() * xhat.array()).rowwise().sum().matrix();
    vector_view(grad, s.beta, n) += d_y.rowwise().sum();

    const MatrixXd d_xhat = (d_y.array().colwise() * params.norm_gain(l).array()).matrix();
    const Eigen::RowVectorXd mean_d = d_xhat.colwise().mean();
    const Eigen::RowVectorXd mean_dx = (d_xhat.array() * xhat.array()).colwise().mean();
    MatrixXd d_z = d_xhat;
    d_z.rowwise() -= mean_d;
    d_z.array() -= xhat.array().rowwise() * mean_dx.array();
    d_z.array().rowwise() *= inv.array();

    const MatrixXd& input = l == 0 ? cache.input : cache.activations[idx - 1];
    matrix_view(grad, s.weight, n, input.rows()).noalias() += d_z * input.transpose();
    vector_view(grad, s.bias, n) += d_z.rowwise().sum();
    if (l > 0) {
      d_act = params.weight(l).transpose() * d_z;
    }
  }
  return loss;
}

OptimizerState OptimizerState::zeros(Index n) {
  return {VectorXd::Zero(n), VectorXd::Zero(n), 0};
}

void adamw_step(VectorXd& params, const VectorXd& grad, OptimizerState& state,
                const AdamWConfig& c) {
  if (grad.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adamw_step: shape mismatch");
  }
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const auto m_hat = state.m.array() / correction1;
  const auto v_hat = state.v.array() / correction2;
  params.array() -= c.lr * m_hat / (v_hat.sqrt() + c.eps) + c.lr * c.weight_decay * params.array();
}

}  // namespace sidewalk
