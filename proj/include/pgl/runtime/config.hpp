#pragma once

// Training configuration and its flat `key = value` file format.

#include "pgl/envs/pendulum.hpp"
#include "pgl/envs/quadrotor.hpp"
#include "pgl/objectives.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace pgl::runtime {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::string env = "pendulum";  // pendulum | quad-hover | quad-track
  double gamma = 0.99;
  double epsilon = 0.2;
  double learning_rate = 1e-4;
  double value_learning_rate = 1e-4;
  int segment_length = kDefaultSegmentLength;
  std::int64_t max_trajectories = 1000;
  std::int64_t max_env_steps = 0;  // 0: no step budget, stop on max_trajectories only
  int buffer_capacity = 1000;
  int warmup = 10;
  std::uint64_t seed = 0;
  int updates_per_trajectory = 25;
  std::vector<int> hidden_sizes{64, 64};
  double init_log_std = -0.5;
  double policy_output_gain = 0.01;
  double reward_scale = 1.0;
  std::int64_t metrics_interval = 2000;
  int return_window = 20;
  bool deterministic = false;
  std::string output_dir = ".";

  // quadrotor task
  envs::Vec3 hover_weights{0.3, 0.5, 0.2};
  envs::Vec3 track_weights{0.5, 0.3, 0.2};
  double r_des = 1.0;
  double v_des = 2.0;
  double divergence_penalty = envs::kDefaultDivergencePenalty;

  LossConfig loss() const { return {epsilon, gamma}; }

  bool budget_left(std::int64_t trajectories, std::int64_t env_steps) const {
    return trajectories < max_trajectories && (max_env_steps == 0 || env_steps < max_env_steps);
  }

  void validate() const {
    if (env != "pendulum" && env != "quad-hover" && env != "quad-track")
      throw ConfigError("env must be one of pendulum, quad-hover, quad-track (got '" + env + "')");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
    if (!(learning_rate > 0.0) || !(value_learning_rate > 0.0)) throw ConfigError("learning rates must be positive");
    if (segment_length <= 0) throw ConfigError("segment_length must be positive");
    if (max_trajectories < 0) throw ConfigError("max_trajectories must be non-negative");
    if (max_env_steps < 0) throw ConfigError("max_env_steps must be non-negative");
    if (buffer_capacity <= 0) throw ConfigError("buffer_capacity must be positive");
    if (warmup < 0) throw ConfigError("warmup must be non-negative");
    if (updates_per_trajectory <= 0) throw ConfigError("updates_per_trajectory must be positive");
    if (hidden_sizes.empty()) throw ConfigError("hidden_sizes must list at least one layer");
    for (int h : hidden_sizes)
      if (h <= 0) throw ConfigError("hidden_sizes entries must be positive");
    if (!std::isfinite(init_log_std)) throw ConfigError("init_log_std must be finite");
    if (!(policy_output_gain > 0.0)) throw ConfigError("policy_output_gain must be positive");
    if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
    if (metrics_interval <= 0) throw ConfigError("metrics_interval must be positive");
    if (return_window <= 0) throw ConfigError("return_window must be positive");
    if ((hover_weights.array() < 0).any() || hover_weights.sum() <= 0) throw ConfigError("hover weights must be >= 0, not all 0");
    if ((track_weights.array() < 0).any() || track_weights.sum() <= 0) throw ConfigError("track weights must be >= 0, not all 0");
    if (!(r_des > 0.0 && v_des > 0.0)) throw ConfigError("r_des and v_des must be positive");
    if (!(divergence_penalty >= 0.0 && std::isfinite(divergence_penalty))) throw ConfigError("divergence_penalty must be finite and >= 0");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int x{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

inline envs::Vec3 parse_vec3(const std::string& key, const std::string& v) {
  const auto xs = parse_list(key, v);
  if (xs.size() != 3) throw ConfigError("'" + key + "': expected three comma-separated numbers");
  return {xs[0], xs[1], xs[2]};
}

}  // namespace detail

/// Applies one `key = value` assignment. Unknown keys are rejected.
inline void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  static const std::map<std::string, std::function<void(TrainConfig&, const std::string&)>> setters{
      {"env", [](TrainConfig& c, const std::string& v) { c.env = v; }},
      {"gamma", [](TrainConfig& c, const std::string& v) { c.gamma = parse_double("gamma", v); }},
      {"epsilon", [](TrainConfig& c, const std::string& v) { c.epsilon = parse_double("epsilon", v); }},
      {"learning_rate", [](TrainConfig& c, const std::string& v) { c.learning_rate = parse_double("learning_rate", v); }},
      {"value_learning_rate",
       [](TrainConfig& c, const std::string& v) { c.value_learning_rate = parse_double("value_learning_rate", v); }},
      {"segment_length", [](TrainConfig& c, const std::string& v) { c.segment_length = parse_int<int>("segment_length", v); }},
      {"max_trajectories",
       [](TrainConfig& c, const std::string& v) { c.max_trajectories = parse_int<std::int64_t>("max_trajectories", v); }},
      {"max_env_steps",
       [](TrainConfig& c, const std::string& v) { c.max_env_steps = parse_int<std::int64_t>("max_env_steps", v); }},
      {"buffer_capacity", [](TrainConfig& c, const std::string& v) { c.buffer_capacity = parse_int<int>("buffer_capacity", v); }},
      {"warmup", [](TrainConfig& c, const std::string& v) { c.warmup = parse_int<int>("warmup", v); }},
      {"seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_int<std::uint64_t>("seed", v); }},
      {"updates_per_trajectory",
       [](TrainConfig& c, const std::string& v) { c.updates_per_trajectory = parse_int<int>("updates_per_trajectory", v); }},
      {"hidden_sizes",
       [](TrainConfig& c, const std::string& v) {
         c.hidden_sizes.clear();
         for (double x : parse_list("hidden_sizes", v)) {
           if (x != std::floor(x)) throw ConfigError("'hidden_sizes': entries must be integers");
           c.hidden_sizes.push_back(static_cast<int>(x));
         }
       }},
      {"init_log_std", [](TrainConfig& c, const std::string& v) { c.init_log_std = parse_double("init_log_std", v); }},
      {"policy_output_gain",
       [](TrainConfig& c, const std::string& v) { c.policy_output_gain = parse_double("policy_output_gain", v); }},
      {"reward_scale", [](TrainConfig& c, const std::string& v) { c.reward_scale = parse_double("reward_scale", v); }},
      {"metrics_interval",
       [](TrainConfig& c, const std::string& v) { c.metrics_interval = parse_int<std::int64_t>("metrics_interval", v); }},
      {"return_window", [](TrainConfig& c, const std::string& v) { c.return_window = parse_int<int>("return_window", v); }},
      {"deterministic", [](TrainConfig& c, const std::string& v) { c.deterministic = parse_bool("deterministic", v); }},
      {"output_dir", [](TrainConfig& c, const std::string& v) { c.output_dir = v; }},
      {"hover_weights", [](TrainConfig& c, const std::string& v) { c.hover_weights = parse_vec3("hover_weights", v); }},
      {"track_weights", [](TrainConfig& c, const std::string& v) { c.track_weights = parse_vec3("track_weights", v); }},
      {"r_des", [](TrainConfig& c, const std::string& v) { c.r_des = parse_double("r_des", v); }},
      {"v_des", [](TrainConfig& c, const std::string& v) { c.v_des = parse_double("v_des", v); }},
      {"divergence_penalty",
       [](TrainConfig& c, const std::string& v) { c.divergence_penalty = parse_double("divergence_penalty", v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(c, value);
}

inline TrainConfig parse_config(std::istream& in) {
  TrainConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    try {
      apply_setting(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

inline envs::TaskSpec task_spec(const TrainConfig& c) {
  envs::TaskSpec t;
  t.kind = c.env == "quad-track" ? envs::TaskKind::Track : envs::TaskKind::Hover;
  t.hover_weights = c.hover_weights;
  t.track_weights = c.track_weights;
  t.r_des = c.r_des;
  t.v_des = c.v_des;
  return t;
}

inline std::unique_ptr<envs::Environment> make_environment(const TrainConfig& c) {
  if (c.env == "pendulum") return std::make_unique<envs::Pendulum>();
  if (c.env == "quad-hover" || c.env == "quad-track")
    return std::make_unique<envs::Quadrotor>(task_spec(c), envs::QuadParams{}, c.divergence_penalty);
  throw ConfigError("unknown environment '" + c.env + "'");
}

}  // namespace pgl::runtime
