#pragma once

// V-trace advantages, the perceptron-like policy objective, the PPO clipped
// surrogate it is equivalent to, and the value regression loss.

#include "pgl/nn.hpp"
#include "pgl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pgl {

inline constexpr int kDefaultSegmentLength = 200;

/// A contiguous segment of n transitions.
///
/// `observations` has n+1 rows: s_0..s_{n-1} plus the state reached after the
/// last transition, which the learner uses to recompute the bootstrap value.
/// `values` likewise has n+1 entries, and V_n must be 0 for a true terminal.
struct TrajectoryBatch {
  Mat observations;
  Mat actions;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> behavior_log_probs;
  std::vector<double> target_log_probs;
  bool terminal = false;

  int size() const { return static_cast<int>(rewards.size()); }

  void validate(int max_length = kDefaultSegmentLength) const {
    const auto n = rewards.size();
    if (n == 0) throw std::invalid_argument("TrajectoryBatch: empty segment");
    if (static_cast<int>(n) > max_length) throw std::invalid_argument("TrajectoryBatch: segment longer than configured length");
    if (values.size() != n + 1) throw std::invalid_argument("TrajectoryBatch: need n+1 value predictions");
    if (behavior_log_probs.size() != n || target_log_probs.size() != n)
      throw std::invalid_argument("TrajectoryBatch: need n log-probabilities per policy");
    if (terminal && values.back() != 0.0) throw std::invalid_argument("TrajectoryBatch: terminal segment must bootstrap from V_n = 0");
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(behavior_log_probs[i]) || !std::isfinite(target_log_probs[i]))
        throw std::invalid_argument("TrajectoryBatch: non-finite log-probability");
    }
    if (observations.rows() != 0 && observations.rows() != static_cast<Eigen::Index>(n + 1))
      throw std::invalid_argument("TrajectoryBatch: need n+1 observation rows");
    if (actions.rows() != 0 && actions.rows() != static_cast<Eigen::Index>(n))
      throw std::invalid_argument("TrajectoryBatch: need n action rows");
  }
};

struct LossConfig {
  double epsilon = 0.2;
  double gamma = 0.99;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  }
};

struct AdvantageResult {
  std::vector<double> a_trace;
  std::vector<double> v_trace;
};

/// Backward V-trace recursion with truncation constants c = rho = 1.
///   A_i = (r_i + gamma V_{i+1} - V_i) + gamma * carry
///   carry <- min(1, pi_i / mu_i) * A_i
///   Vtrace_i = V_i + carry
inline AdvantageResult vtrace(const TrajectoryBatch& batch, double gamma) {
  const int n = batch.size();
  if (n == 0) throw std::invalid_argument("vtrace: empty batch");
  if (batch.values.size() != static_cast<std::size_t>(n) + 1 || batch.behavior_log_probs.size() != static_cast<std::size_t>(n) ||
      batch.target_log_probs.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("vtrace: inconsistent batch lengths");
  AdvantageResult out{std::vector<double>(n), std::vector<double>(n)};
  double carry = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double delta = batch.rewards[i] + gamma * batch.values[i + 1] - batch.values[i];
    out.a_trace[i] = delta + gamma * carry;
    carry = std::min(1.0, ratio(batch.target_log_probs[i], batch.behavior_log_probs[i])) * out.a_trace[i];
    out.v_trace[i] = batch.values[i] + carry;
  }
  return out;
}

/// min[(ratio - 1) A, epsilon |A|]
inline double perceptron_policy_objective(double ratio_value, double advantage, double epsilon) {
  return std::min((ratio_value - 1.0) * advantage, epsilon * std::abs(advantage));
}

/// min[ratio A, clip(ratio, 1 - epsilon, 1 + epsilon) A]
inline double ppo_clip_objective(double ratio_value, double advantage, double epsilon) {
  return std::min(ratio_value * advantage, std::clamp(ratio_value, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

/// |L_clip - A - L_perceptron|, identically zero.
inline double clip_identity_residual(double ratio_value, double advantage, double epsilon) {
  return std::abs(ppo_clip_objective(ratio_value, advantage, epsilon) - advantage -
                  perceptron_policy_objective(ratio_value, advantage, epsilon));
}

/// d/d ratio of the perceptron objective. Ties resolve to the margin branch.
inline double perceptron_ratio_derivative(double ratio_value, double advantage, double epsilon) {
  return (ratio_value - 1.0) * advantage < epsilon * std::abs(advantage) ? advantage : 0.0;
}

/// d/d ratio of the clipped surrogate, away from its kinks.
inline double ppo_clip_ratio_derivative(double ratio_value, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio_value, 1.0 - epsilon, 1.0 + epsilon);
  if (ratio_value * advantage <= clipped * advantage) return advantage;
  return 0.0;
}

struct PolicyLossResult {
  double loss = 0.0;
  Vec gradient;
  int clipped_samples = 0;  // samples sitting on the margin branch
  int clamp_events = 0;     // ratios that hit the overflow clamp
};

/// L_policy = sum_i min[(pi_i/mu_i - 1) A_i, epsilon |A_i|] with pi recomputed
/// from `policy` at the stored (s, a). Advantages are constants.
inline PolicyLossResult policy_loss(const TrajectoryBatch& batch, const AdvantageResult& advantages,
                                    const GaussianPolicy& policy, const LossConfig& config) {
  const int n = batch.size();
  if (static_cast<int>(advantages.a_trace.size()) != n) throw std::invalid_argument("policy_loss: advantage length mismatch");
  const Mat obs = batch.observations.topRows(n);
  const BatchLogProb current = log_prob_batch(policy, obs, batch.actions);

  PolicyLossResult out;
  Vec weights = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double adv = advantages.a_trace[i];
    const RatioValue r = ratio_checked(current.log_probs(i), batch.behavior_log_probs[i]);
    if (r.clamped) ++out.clamp_events;
    out.loss += perceptron_policy_objective(r.value, adv, config.epsilon);
    const bool margin_branch = !((r.value - 1.0) * adv < config.epsilon * std::abs(adv));
    if (margin_branch) {
      ++out.clipped_samples;
    } else if (!r.clamped) {
      // d ratio / d theta = ratio * d log pi / d theta
      weights(i) = adv * r.value;
    }
  }
  if (!std::isfinite(out.loss)) throw NonFiniteError("policy_loss: non-finite loss");
  out.gradient = log_prob_batch_gradient(policy, current, batch.actions, weights);
  return out;
}

struct ValueLossResult {
  double loss = 0.0;
  Vec gradient;
};

/// L_value = (1/n) sum_i (V(s_i) - Vtrace_i)^2 with Vtrace held constant.
inline ValueLossResult value_loss(const TrajectoryBatch& batch, const AdvantageResult& advantages,
                                  const DenseNet& value_net) {
  const int n = batch.size();
  if (static_cast<int>(advantages.v_trace.size()) != n) throw std::invalid_argument("value_loss: target length mismatch");
  if (value_net.output_size() != 1) throw std::invalid_argument("value_loss: value net must have one output");
  const ForwardTape tape = forward_batch(value_net, batch.observations.topRows(n));
  Mat d_out(n, 1);
  ValueLossResult out;
  for (int i = 0; i < n; ++i) {
    const double err = tape.output()(i, 0) - advantages.v_trace[i];
    out.loss += err * err;
    d_out(i, 0) = 2.0 * err / n;
  }
  out.loss /= n;
  if (!std::isfinite(out.loss)) throw NonFiniteError("value_loss: non-finite loss");
  out.gradient = backward_batch(value_net, tape, d_out);
  return out;
}

}  // namespace pgl
