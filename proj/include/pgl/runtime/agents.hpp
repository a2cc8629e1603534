#pragma once

// Trajectory collection (runner) and the V-trace / perceptron-objective
// update (learner).

#include "pgl/envs/env.hpp"
#include "pgl/objectives.hpp"
#include "pgl/runtime/config.hpp"
#include "pgl/runtime/metrics.hpp"
#include "pgl/runtime/replay_buffer.hpp"
#include "pgl/runtime/shared_params.hpp"

#include <cstdint>
#include <vector>

namespace pgl::runtime {

using TrajectoryBuffer = ReplayBuffer<TrajectoryBatch>;

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxConsecutiveSkips = 10;
inline constexpr int kMaxConsecutiveAborts = 1000;

/// Steps one environment with a behavior-policy snapshot and cuts the stream
/// into segments of at most `segment_length` transitions. Episodes continue
/// across segments; a segment also ends where its episode ends.
class Runner {
 public:
  Runner(envs::Environment& env, int segment_length, Rng rng)
      : env_(env), segment_length_(segment_length), rng_(std::move(rng)) {}

  TrajectoryBatch collect(const ParamSnapshot& params) {
    for (int attempt = 0;; ++attempt) {
      try {
        return collect_once(params);
      } catch (const envs::DivergenceError&) {
        ++aborted_episodes_;
        need_reset_ = true;
        if (attempt + 1 >= kMaxConsecutiveAborts) throw TrainingAborted("runner: environment keeps diverging");
      }
    }
  }

  std::int64_t env_steps() const { return env_steps_; }
  const std::vector<double>& episode_returns() const { return episode_returns_; }
  int aborted_episodes() const { return aborted_episodes_; }

 private:
  TrajectoryBatch collect_once(const ParamSnapshot& params) {
    const GaussianPolicy& policy = params.policy;
    if (need_reset_) {
      obs_ = env_.reset(rng_);
      episode_return_ = 0.0;
      need_reset_ = false;
    }
    std::vector<Vec> observations{obs_};
    std::vector<Vec> actions;
    TrajectoryBatch batch;
    double segment_return = 0.0;
    bool episode_over = false;
    for (int t = 0; t < segment_length_; ++t) {
      ActionSample a = sample_action(policy, obs_, rng_);
      const envs::StepResult step = env_.step(a.action);
      actions.push_back(std::move(a.action));
      batch.behavior_log_probs.push_back(a.log_prob);
      batch.rewards.push_back(step.reward);
      segment_return += step.reward;
      obs_ = step.observation;
      observations.push_back(obs_);
      if (step.terminated || step.truncated) {
        batch.terminal = step.terminated;
        episode_over = true;
        break;
      }
    }
    const int n = batch.size();
    batch.observations.resize(n + 1, policy.obs_dim());
    for (int i = 0; i <= n; ++i) batch.observations.row(i) = observations[i].transpose();
    batch.actions.resize(n, policy.action_dim());
    for (int i = 0; i < n; ++i) batch.actions.row(i) = actions[i].transpose();
    const ForwardTape values = forward_batch(params.value_net, batch.observations);
    batch.values.resize(n + 1);
    for (int i = 0; i <= n; ++i) batch.values[i] = values.output()(i, 0);
    if (batch.terminal) batch.values[n] = 0.0;
    batch.target_log_probs = batch.behavior_log_probs;

    // Commit episode bookkeeping only once the segment is complete.
    env_steps_ += n;
    episode_return_ += segment_return;
    if (episode_over) {
      episode_returns_.push_back(episode_return_);
      need_reset_ = true;
    }
    return batch;
  }

  envs::Environment& env_;
  int segment_length_;
  Rng rng_;
  bool need_reset_ = true;
  Vec obs_;
  double episode_return_ = 0.0;
  std::int64_t env_steps_ = 0;
  std::vector<double> episode_returns_;
  int aborted_episodes_ = 0;
};

struct UpdateStats {
  bool skipped = false;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double abs_adv_sum = 0.0;
  int samples = 0;
  int clipped = 0;
  int clamps = 0;
};

/// Owns the working parameters and optimizer state; publishes every update
/// to SharedParams as one new version.
class Learner {
 public:
  Learner(SharedParams& shared, const TrajectoryBuffer& buffer, const TrainConfig& config, Rng rng)
      : shared_(shared), buffer_(buffer), config_(config), rng_(std::move(rng)) {
    const auto snap = shared_.read();
    policy_ = snap->policy;
    value_net_ = snap->value_net;
    policy_adam_ = AdamState(policy_.param_count());
    value_adam_ = AdamState(value_net_.param_count());
  }

  /// Prepares a stored segment for an update: pi log-probs and V recomputed
  /// under the current parameters, rewards scaled.
  TrajectoryBatch refresh(const TrajectoryBatch& stored) const {
    TrajectoryBatch batch = stored;
    const int n = batch.size();
    const BatchLogProb current = log_prob_batch(policy_, batch.observations.topRows(n), batch.actions);
    for (int i = 0; i < n; ++i) batch.target_log_probs[i] = current.log_probs(i);
    const ForwardTape values = forward_batch(value_net_, batch.observations);
    for (int i = 0; i <= n; ++i) batch.values[i] = values.output()(i, 0);
    if (batch.terminal) batch.values[n] = 0.0;
    if (config_.reward_scale != 1.0)
      for (double& r : batch.rewards) r *= config_.reward_scale;
    return batch;
  }

  UpdateStats update() {
    const auto stored = buffer_.sample(rng_);
    return update_on(*stored);
  }

  UpdateStats update_on(const TrajectoryBatch& stored) {
    UpdateStats stats;
    try {
      const TrajectoryBatch batch = refresh(stored);
      const AdvantageResult adv = vtrace(batch, config_.gamma);
      const PolicyLossResult pl = policy_loss(batch, adv, policy_, config_.loss());
      const ValueLossResult vl = value_loss(batch, adv, value_net_);
      if (!pl.gradient.allFinite() || !vl.gradient.allFinite()) throw NonFiniteError("learner: non-finite gradient");

      Vec policy_params = policy_.flat_params();
      adam_step(policy_params, pl.gradient, policy_adam_, config_.learning_rate, StepDirection::Ascent);
      policy_.set_flat_params(policy_params);
      adam_step(value_net_.params(), vl.gradient, value_adam_, config_.value_learning_rate, StepDirection::Descent);

      stats.policy_loss = pl.loss;
      stats.value_loss = vl.loss;
      stats.samples = batch.size();
      stats.clipped = pl.clipped_samples;
      stats.clamps = pl.clamp_events;
      for (double a : adv.a_trace) stats.abs_adv_sum += std::abs(a);
    } catch (const NonFiniteError&) {
      stats.skipped = true;
      ++skipped_;
      if (++consecutive_skips_ >= kMaxConsecutiveSkips)
        throw TrainingAborted("learner: " + std::to_string(kMaxConsecutiveSkips) + " consecutive non-finite updates");
      return stats;
    }
    consecutive_skips_ = 0;
    ++updates_;
    shared_.commit(policy_, value_net_);
    return stats;
  }

  std::int64_t updates() const { return updates_; }
  std::int64_t skipped() const { return skipped_; }
  const GaussianPolicy& policy() const { return policy_; }
  const DenseNet& value_net() const { return value_net_; }

 private:
  SharedParams& shared_;
  const TrajectoryBuffer& buffer_;
  const TrainConfig& config_;
  Rng rng_;
  GaussianPolicy policy_;
  DenseNet value_net_;
  AdamState policy_adam_;
  AdamState value_adam_;
  std::int64_t updates_ = 0;
  std::int64_t skipped_ = 0;
  int consecutive_skips_ = 0;
};

inline void accumulate(UpdateAccumulator& acc, const UpdateStats& s) {
  if (s.skipped) return;
  ++acc.updates;
  acc.policy_loss_sum += s.policy_loss;
  acc.value_loss_sum += s.value_loss;
  acc.abs_adv_sum += s.abs_adv_sum;
  acc.samples += s.samples;
  acc.clipped += s.clipped;
  acc.clamps += s.clamps;
}

}  // namespace pgl::runtime
