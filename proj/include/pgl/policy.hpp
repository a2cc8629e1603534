#pragma once

// Diagonal-Gaussian policy with a state-independent, learned log-std.

#include "pgl/nn.hpp"

#include <numbers>

namespace pgl {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
inline constexpr double kRatioMin = 1e-8;
inline constexpr double kRatioMax = 1e8;

struct GaussianPolicy {
  DenseNet mean_net;
  Vec log_std;

  GaussianPolicy() = default;
  GaussianPolicy(DenseNet net, Vec log_std_init) : mean_net(std::move(net)), log_std(std::move(log_std_init)) {
    if (log_std.size() != mean_net.output_size())
      throw std::invalid_argument("GaussianPolicy: log_std length must equal the action dimension");
  }

  int obs_dim() const { return mean_net.input_size(); }
  int action_dim() const { return mean_net.output_size(); }
  Eigen::Index param_count() const { return mean_net.param_count() + log_std.size(); }

  /// Flat parameter vector: mean-net parameters followed by log_std.
  Vec flat_params() const {
    Vec p(param_count());
    p << mean_net.params(), log_std;
    return p;
  }
  void set_flat_params(const Vec& p) {
    if (p.size() != param_count()) throw std::invalid_argument("GaussianPolicy: flat parameter length mismatch");
    mean_net.params() = p.head(mean_net.param_count());
    log_std = p.tail(log_std.size());
  }

  friend bool operator==(const GaussianPolicy& a, const GaussianPolicy& b) {
    return a.mean_net == b.mean_net && a.log_std == b.log_std;
  }
};

/// Policy with tanh hidden layers, orthogonal init, small output gain.
inline GaussianPolicy make_gaussian_policy(int obs_dim, int action_dim, const std::vector<int>& hidden, Rng& rng,
                                           double init_log_std = -0.5, double output_gain = 0.01) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  DenseNet net(sizes);
  init_orthogonal(net, rng, 1.0, output_gain);
  return {std::move(net), Vec::Constant(action_dim, init_log_std)};
}

struct ActionSample {
  Vec action;
  double log_prob = 0.0;
};

/// Log density of a diagonal Gaussian with the given mean and log-std.
inline double gaussian_log_density(const Vec& mean, const Vec& log_std, const Vec& action) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double z = (action(k) - mean(k)) / std::exp(log_std(k));
    total += -0.5 * z * z - log_std(k) - kHalfLog2Pi;
  }
  return total;
}

inline double log_prob(const GaussianPolicy& policy, const Vec& obs, const Vec& action) {
  if (action.size() != policy.action_dim()) throw std::invalid_argument("log_prob: action dimension mismatch");
  return gaussian_log_density(forward(policy.mean_net, obs), policy.log_std, action);
}

inline ActionSample sample_action(const GaussianPolicy& policy, const Vec& obs, Rng& rng) {
  Vec mean = forward(policy.mean_net, obs);
  if (!mean.allFinite()) throw NonFiniteError("sample_action: policy mean is not finite");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec action(mean.size());
  for (Eigen::Index k = 0; k < mean.size(); ++k) action(k) = mean(k) + std::exp(policy.log_std(k)) * normal(rng);
  const double lp = gaussian_log_density(mean, policy.log_std, action);
  return {std::move(action), lp};
}

/// Deterministic action (the mean), used for evaluation.
inline Vec mean_action(const GaussianPolicy& policy, const Vec& obs) { return forward(policy.mean_net, obs); }

struct RatioValue {
  double value = 1.0;
  bool clamped = false;
};

/// exp(lp_pi - lp_mu) clamped to [1e-8, 1e8]; reports whether the clamp bound.
inline RatioValue ratio_checked(double log_prob_pi, double log_prob_mu) {
  const double r = std::exp(log_prob_pi - log_prob_mu);
  if (r < kRatioMin) return {kRatioMin, true};
  if (r > kRatioMax) return {kRatioMax, true};
  return {r, false};
}

inline double ratio(double log_prob_pi, double log_prob_mu) { return ratio_checked(log_prob_pi, log_prob_mu).value; }

/// Gradient of log_prob with respect to the flat policy parameters.
inline Vec log_prob_gradient(const GaussianPolicy& policy, const Vec& obs, const Vec& action) {
  const Vec mean = forward(policy.mean_net, obs);
  const Vec inv_var = (-2.0 * policy.log_std).array().exp();
  const Vec diff = action - mean;
  Vec grad(policy.param_count());
  grad.head(policy.mean_net.param_count()) =
      backward(policy.mean_net, obs, Vec(diff.cwiseProduct(inv_var)));
  grad.tail(policy.action_dim()) = (diff.array().square() * inv_var.array() - 1.0).matrix();
  return grad;
}

/// Batched log-probabilities. Keeps the forward tape for gradient passes.
struct BatchLogProb {
  ForwardTape tape;
  Vec log_probs;
};

inline BatchLogProb log_prob_batch(const GaussianPolicy& policy, const Mat& observations, const Mat& actions) {
  if (actions.rows() != observations.rows() || actions.cols() != policy.action_dim())
    throw std::invalid_argument("log_prob_batch: action matrix shape mismatch");
  BatchLogProb out{forward_batch(policy.mean_net, observations), Vec(observations.rows())};
  const Mat& mean = out.tape.output();
  const Eigen::RowVectorXd inv_std = (-policy.log_std).array().exp().transpose();
  const double norm = policy.log_std.sum() + kHalfLog2Pi * policy.action_dim();
  for (Eigen::Index i = 0; i < observations.rows(); ++i) {
    const Eigen::RowVectorXd z = (actions.row(i) - mean.row(i)).cwiseProduct(inv_std);
    out.log_probs(i) = -0.5 * z.squaredNorm() - norm;
  }
  return out;
}

/// Gradient of sum_i weights_i * log_prob_i with respect to the flat parameters.
inline Vec log_prob_batch_gradient(const GaussianPolicy& policy, const BatchLogProb& batch, const Mat& actions,
                                   const Vec& weights) {
  const Mat& mean = batch.tape.output();
  const Eigen::RowVectorXd inv_var = (-2.0 * policy.log_std).array().exp().transpose();
  Mat diff = actions - mean;
  Mat d_mean = diff.array().rowwise() * inv_var.array();
  d_mean.array().colwise() *= weights.array();
  Vec grad(policy.param_count());
  grad.head(policy.mean_net.param_count()) = backward_batch(policy.mean_net, batch.tape, d_mean);
  Mat sq = (diff.array().square().rowwise() * inv_var.array() - 1.0).matrix();
  grad.tail(policy.action_dim()) = (sq.transpose() * weights);
  return grad;
}

}  // namespace pgl
