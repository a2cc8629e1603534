#pragma once

// Training driver. Deterministic mode alternates strictly: collect one
// segment, then (once past warmup) run a fixed number of learner updates.
// Concurrent mode runs the learner on its own thread, free-running once
// released, and stops it after the runner has collected its last segment.

#include "pgl/runtime/agents.hpp"
#include "pgl/runtime/checkpoint.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <filesystem>
#include <functional>
#include <fstream>
#include <numeric>
#include <thread>

namespace pgl::runtime {

/// Independent generator streams derived from one seed.
inline Rng make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng(seq);
}

enum RngStream : std::uint32_t { kInitStream = 1, kRunnerStream = 2, kLearnerStream = 3 };

inline double trailing_mean(const std::vector<double>& xs, int window) {
  if (xs.empty()) return std::nan("");
  const auto k = std::min<std::size_t>(xs.size(), static_cast<std::size_t>(window));
  return std::accumulate(xs.end() - static_cast<std::ptrdiff_t>(k), xs.end(), 0.0) / static_cast<double>(k);
}

struct TrainResult {
  std::vector<MetricsRow> rows;
  std::vector<double> episode_returns;
  std::int64_t trajectories = 0;
  std::int64_t env_steps = 0;
  std::int64_t learner_updates = 0;
  std::int64_t skipped_updates = 0;
  int aborted_episodes = 0;
  GaussianPolicy policy;
  DenseNet value_net;
  std::uint64_t version = 0;
};

inline std::pair<GaussianPolicy, DenseNet> initial_networks(const TrainConfig& c, int obs_dim, int action_dim) {
  Rng rng = make_rng(c.seed, kInitStream);
  GaussianPolicy policy =
      make_gaussian_policy(obs_dim, action_dim, c.hidden_sizes, rng, c.init_log_std, c.policy_output_gain);
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), c.hidden_sizes.begin(), c.hidden_sizes.end());
  sizes.push_back(1);
  DenseNet value_net(sizes);
  init_orthogonal(value_net, rng, 1.0, 1.0);
  return {std::move(policy), std::move(value_net)};
}

namespace detail {

class MetricsWriter {
 public:
  MetricsWriter(const TrainConfig& c, std::ostream* out) : config_(c), out_(out), next_(c.metrics_interval) {
    if (out_) *out_ << kMetricsHeader << '\n';
  }

  /// Emits a row if env_steps has crossed the next multiple of the interval,
  /// or unconditionally (when steps advanced) if `final_row`.
  void maybe_emit(std::int64_t env_steps, std::int64_t updates, const std::vector<double>& returns,
                  UpdateAccumulator& acc, double wall_time, bool final_row = false) {
    if (final_row ? env_steps <= last_steps_ : env_steps < next_) return;
    MetricsRow row;
    row.wall_time_s = config_.deterministic ? 0.0 : wall_time;
    row.env_steps = env_steps;
    row.learner_updates = updates;
    row.mean_return = trailing_mean(returns, config_.return_window);
    acc.fill(row);
    acc = {};
    if (out_) {
      write_metrics_row(*out_, row);
      out_->flush();
    }
    rows_.push_back(row);
    last_steps_ = env_steps;
    next_ = (env_steps / config_.metrics_interval + 1) * config_.metrics_interval;
  }

  std::vector<MetricsRow> take_rows() { return std::move(rows_); }

 private:
  const TrainConfig& config_;
  std::ostream* out_;
  std::int64_t next_;
  std::int64_t last_steps_ = 0;
  std::vector<MetricsRow> rows_;
};

}  // namespace detail

/// Called after each trajectory's updates with the trajectory count and the
/// current snapshot. Deterministic mode only.
using TrainObserver = std::function<void(std::int64_t, const ParamSnapshot&)>;

inline TrainResult train(const TrainConfig& config, std::ostream* metrics_out = nullptr, const TrainObserver& observer = {}) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&start] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  auto env = make_environment(config);
  auto [policy0, value0] = initial_networks(config, env->obs_dim(), env->action_dim());
  SharedParams shared(std::move(policy0), std::move(value0));
  TrajectoryBuffer buffer(static_cast<std::size_t>(config.buffer_capacity));
  Runner runner(*env, config.segment_length, make_rng(config.seed, kRunnerStream));
  Learner learner(shared, buffer, config, make_rng(config.seed, kLearnerStream));
  detail::MetricsWriter metrics(config, metrics_out);
  UpdateAccumulator acc;
  TrainResult result;

  if (config.deterministic) {
    for (std::int64_t j = 0; config.budget_left(j, runner.env_steps()); ++j) {
      buffer.push(runner.collect(*shared.read()));
      if (static_cast<std::int64_t>(buffer.total_pushed()) > config.warmup)
        for (int u = 0; u < config.updates_per_trajectory; ++u) accumulate(acc, learner.update());
      metrics.maybe_emit(runner.env_steps(), learner.updates(), runner.episode_returns(), acc, elapsed());
      if (observer) observer(j + 1, *shared.read());
    }
    metrics.maybe_emit(runner.env_steps(), learner.updates(), runner.episode_returns(), acc, elapsed(), true);
  } else {
    std::mutex mutex;  // guards acc, committed, and the flags below
    std::int64_t committed = 0;
    std::condition_variable released_cv;
    bool released = false;
    std::atomic<bool> stop{false};
    std::exception_ptr learner_error;
    std::atomic<bool> learner_failed{false};

    std::thread learner_thread([&] {
      {
        std::unique_lock lock(mutex);
        released_cv.wait(lock, [&] { return released || stop.load(); });
      }
      try {
        while (!stop.load()) {
          const UpdateStats s = learner.update();
          std::lock_guard lock(mutex);
          accumulate(acc, s);
          if (!s.skipped) ++committed;
        }
      } catch (...) {
        learner_error = std::current_exception();
        learner_failed = true;
      }
    });
    auto shutdown = [&] {
      {
        std::lock_guard lock(mutex);
        stop = true;
      }
      released_cv.notify_all();
      learner_thread.join();
    };

    try {
      for (std::int64_t j = 0; config.budget_left(j, runner.env_steps()) && !learner_failed; ++j) {
        buffer.push(runner.collect(*shared.read()));
        if (!released && static_cast<std::int64_t>(buffer.total_pushed()) > config.warmup) {
          {
            std::lock_guard lock(mutex);
            released = true;
          }
          released_cv.notify_all();
        }
        std::lock_guard lock(mutex);
        metrics.maybe_emit(runner.env_steps(), committed, runner.episode_returns(), acc, elapsed());
      }
    } catch (...) {
      shutdown();
      throw;
    }
    shutdown();
    if (learner_error) std::rethrow_exception(learner_error);
    metrics.maybe_emit(runner.env_steps(), learner.updates(), runner.episode_returns(), acc, elapsed(), true);
  }

  result.rows = metrics.take_rows();
  result.episode_returns = runner.episode_returns();
  result.trajectories = static_cast<std::int64_t>(buffer.total_pushed());
  result.env_steps = runner.env_steps();
  result.learner_updates = learner.updates();
  result.skipped_updates = learner.skipped();
  result.aborted_episodes = runner.aborted_episodes();
  result.policy = learner.policy();
  result.value_net = learner.value_net();
  result.version = shared.version();
  return result;
}

/// Runs `train` and writes metrics.csv, checkpoint.json and policy.bin into
/// config.output_dir.
inline TrainResult train_to_directory(const TrainConfig& config) {
  config.validate();
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  std::ofstream metrics((dir / "metrics.csv").string());
  if (!metrics) throw std::runtime_error("cannot open " + (dir / "metrics.csv").string());
  TrainResult r = train(config, &metrics);
  save_checkpoint((dir / "checkpoint.json").string(), {config.env, r.policy, r.value_net, r.version});
  write_weights((dir / "policy.bin").string(), r.policy.mean_net);
  return r;
}

}  // namespace pgl::runtime
