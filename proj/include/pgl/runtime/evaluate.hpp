#pragma once

// Deterministic-policy evaluation (action = network mean) with optional
// per-episode CSV dumps.

#include "pgl/envs/quadrotor.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace pgl::runtime {

struct EpisodeEval {
  double episode_return = 0.0;
  int steps = 0;
  bool terminated = false;
  double initial_position_error = std::numeric_limits<double>::quiet_NaN();  // quadrotor only
  double final_position_error = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> radial_error;  // track task only, one entry per state s_0..s_T
};

struct EvalSummary {
  std::vector<EpisodeEval> episodes;

  double mean_return() const {
    if (episodes.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const auto& e : episodes) s += e.episode_return;
    return s / static_cast<double>(episodes.size());
  }
  double median_initial_position_error() const { return median_of(&EpisodeEval::initial_position_error); }
  double median_final_position_error() const { return median_of(&EpisodeEval::final_position_error); }

 private:
  double median_of(double EpisodeEval::*field) const {
    std::vector<double> xs;
    for (const auto& e : episodes) xs.push_back(e.*field);
    return median(xs);
  }

 public:
  static double median(std::vector<double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
  }
};

inline void check_architecture(const DenseNet& mean_net, const envs::Environment& env) {
  if (mean_net.input_size() != env.obs_dim() || mean_net.output_size() != env.action_dim())
    throw std::invalid_argument("policy network is " + std::to_string(mean_net.input_size()) + " -> " +
                                std::to_string(mean_net.output_size()) + " but " + env.name() + " needs " +
                                std::to_string(env.obs_dim()) + " -> " + std::to_string(env.action_dim()));
}

/// Runs `episodes` episodes from random resets. With a non-empty
/// `dump_prefix`, episode k is written to `<dump_prefix>_<k>.csv`.
inline EvalSummary evaluate(const DenseNet& mean_net, envs::Environment& env, int episodes, Rng& rng,
                            const std::string& dump_prefix = "") {
  check_architecture(mean_net, env);
  if (episodes < 0) throw std::invalid_argument("evaluate: episodes must be non-negative");
  const auto* quad = dynamic_cast<const envs::Quadrotor*>(&env);
  const bool track = quad && quad->task().kind == envs::TaskKind::Track;

  EvalSummary summary;
  for (int k = 0; k < episodes; ++k) {
    EpisodeEval ep;
    Vec obs = env.reset(rng);
    std::ofstream dump;
    if (!dump_prefix.empty()) {
      const std::string path = dump_prefix + "_" + std::to_string(k) + ".csv";
      dump.open(path);
      if (!dump) throw std::runtime_error("cannot open " + path);
      dump << 't';
      for (const auto& n : env.state_names()) dump << ',' << n;
      for (int a = 0; a < env.action_dim(); ++a) dump << ",a" << a;
      dump << ",reward\n";
      dump.precision(17);
    }
    if (quad) ep.initial_position_error = quad->state().position.norm();
    if (track) ep.radial_error.push_back(envs::circle_distance(quad->state().position, quad->task().r_des));

    for (int t = 0; t < env.max_steps(); ++t) {
      const Vec state = env.state_vector();
      const Vec action = forward(mean_net, obs);
      const envs::StepResult step = env.step(action);
      if (dump.is_open()) {
        dump << t;
        for (Eigen::Index i = 0; i < state.size(); ++i) dump << ',' << state(i);
        for (Eigen::Index i = 0; i < action.size(); ++i) dump << ',' << action(i);
        dump << ',' << step.reward << '\n';
      }
      ep.episode_return += step.reward;
      ++ep.steps;
      obs = step.observation;
      if (track) ep.radial_error.push_back(envs::circle_distance(quad->state().position, quad->task().r_des));
      if (step.terminated || step.truncated) {
        ep.terminated = step.terminated;
        break;
      }
    }
    if (quad) ep.final_position_error = quad->state().position.norm();
    summary.episodes.push_back(std::move(ep));
  }
  return summary;
}

}  // namespace pgl::runtime
