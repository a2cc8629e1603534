// pgl: train, evaluate, verify-oracle, export-weights.

#include "pgl/runtime/evaluate.hpp"
#include "pgl/runtime/trainer.hpp"
#include "pgl/runtime/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <iostream>

namespace {

using namespace pgl;
using namespace pgl::runtime;

constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed, bool deterministic) {
  TrainConfig config;
  try {
    config = load_config(config_path);
    if (seed) config.seed = *seed;
    if (deterministic) config.deterministic = true;
    config.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const TrainResult r = train_to_directory(config);
    std::cout << "trajectories " << r.trajectories << ", env steps " << r.env_steps << ", learner updates "
              << r.learner_updates << " (" << r.skipped_updates << " skipped), aborted episodes "
              << r.aborted_episodes << '\n';
    std::cout << "final mean return (last " << config.return_window
              << " episodes): " << format_number(trailing_mean(r.episode_returns, config.return_window)) << '\n';
  } catch (const TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kExitAbort;
  } catch (const NonFiniteError& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kExitAbort;
  }
  return 0;
}

int run_eval(const std::string& weights, const std::string& env_name, int episodes, std::uint64_t seed,
             const std::string& dump_prefix) {
  TrainConfig config;
  config.env = env_name;
  try {
    config.validate();
  } catch (const ConfigError& e) {
    std::cerr << "eval: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto env = make_environment(config);
  DenseNet net;
  try {
    net = load_policy_weights(weights);
    check_architecture(net, *env);
  } catch (const std::exception& e) {
    std::cerr << "eval: " << e.what() << '\n';
    return 1;
  }
  Rng rng(seed);
  const EvalSummary s = evaluate(net, *env, episodes, rng, dump_prefix);
  const bool quad = env_name != "pendulum";
  const bool track = env_name == "quad-track";
  std::cout << "episode,return,steps,terminated";
  if (quad) std::cout << ",initial_position_error,final_position_error";
  if (track) std::cout << ",initial_radial_error,final_radial_error";
  std::cout << '\n';
  for (std::size_t k = 0; k < s.episodes.size(); ++k) {
    const EpisodeEval& e = s.episodes[k];
    std::cout << k << ',' << format_number(e.episode_return) << ',' << e.steps << ',' << (e.terminated ? 1 : 0);
    if (quad) std::cout << ',' << format_number(e.initial_position_error) << ',' << format_number(e.final_position_error);
    if (track) std::cout << ',' << format_number(e.radial_error.front()) << ',' << format_number(e.radial_error.back());
    std::cout << '\n';
  }
  if (!s.episodes.empty()) {
    std::cerr << "mean return " << format_number(s.mean_return());
    if (quad)
      std::cerr << ", median position error " << format_number(s.median_initial_position_error()) << " -> "
                << format_number(s.median_final_position_error());
    std::cerr << '\n';
  }
  return 0;
}

int run_verify(int trials, std::uint64_t seed, bool corrupt) {
  const OracleReport report = verify_oracle(seed, trials, corrupt);
  write_oracle_csv(std::cout, report);
  if (!report.all_pass()) {
    std::cerr << "verify-oracle: residual above threshold\n";
    return 1;
  }
  return 0;
}

int run_export(const std::string& in, const std::string& out) {
  try {
    write_weights(out, load_policy_weights(in));
  } catch (const std::exception& e) {
    std::cerr << "export-weights: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy perceptron-objective policy-gradient lab"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Train with the runner/learner pair");
  std::string config_path;
  std::optional<std::uint64_t> train_seed;
  bool deterministic = false;
  train_cmd->add_option("--config", config_path, "Config file (key = value lines)")->required();
  train_cmd->add_option("--seed", train_seed, "Override the config seed");
  train_cmd->add_flag("--deterministic", deterministic, "Strict collect/update alternation on one thread");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy deterministically");
  std::string weights, env_name, dump_prefix;
  int episodes = 10;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--weights", weights, "Binary weights or checkpoint.json")->required();
  eval_cmd->add_option("--env", env_name, "pendulum | quad-hover | quad-track")->required();
  eval_cmd->add_option("--episodes", episodes, "Number of episodes")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--seed", eval_seed, "Reset seed");
  eval_cmd->add_option("--dump", dump_prefix, "Write <prefix>_<k>.csv per episode");

  auto* verify_cmd = app.add_subcommand("verify-oracle", "Check the exact-MDP identities on random instances");
  int trials = 100;
  std::uint64_t verify_seed = 0;
  bool corrupt = false;
  verify_cmd->add_option("--trials", trials, "Random instances")->check(CLI::NonNegativeNumber);
  verify_cmd->add_option("--seed", verify_seed, "Instance seed");
  verify_cmd->add_flag("--corrupt", corrupt, "Offset one identity by 1e-6 (self-test; must fail)");

  auto* export_cmd = app.add_subcommand("export-weights", "Write the policy mean network in binary form");
  std::string in_path, out_path;
  export_cmd->add_option("--in", in_path, "checkpoint.json or binary weights")->required();
  export_cmd->add_option("--out", out_path, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  if (*train_cmd) return run_train(config_path, train_seed, deterministic);
  if (*eval_cmd) return run_eval(weights, env_name, episodes, eval_seed, dump_prefix);
  if (*verify_cmd) return run_verify(trials, verify_seed, corrupt);
  if (*export_cmd) return run_export(in_path, out_path);
  return 1;
}
