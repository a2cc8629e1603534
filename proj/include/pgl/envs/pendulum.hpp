#pragma once

// Torque-limited pendulum swing-up. theta = 0 is upright.

#include "pgl/envs/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pgl::envs {

struct PendulumParams {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 10.0;
  double dt = 0.05;
  double max_torque = 2.0;
  double max_speed = 8.0;
  int max_steps = 200;

  void validate() const {
    if (!(mass > 0 && length > 0 && gravity > 0 && dt > 0 && max_torque > 0 && max_speed > 0 && max_steps > 0))
      throw std::invalid_argument("PendulumParams: all parameters must be positive");
  }
};

struct PendulumState {
  double theta = 0.0;
  double theta_dot = 0.0;
  int steps = 0;
};

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double x) {
  constexpr double pi = std::numbers::pi;
  return std::fmod(std::fmod(x + pi, 2.0 * pi) + 2.0 * pi, 2.0 * pi) - pi;
}

inline Vec pendulum_observation(const PendulumState& s, const PendulumParams& params) {
  return Vec{{std::cos(s.theta), std::sin(s.theta), s.theta_dot / params.max_speed}};
}

struct PendulumReset {
  PendulumState state;
  Vec observation;
};

inline PendulumReset pendulum_reset(Rng& rng, const PendulumParams& params = {}) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> speed(-1.0, 1.0);
  PendulumState s;
  s.theta = angle(rng);
  s.theta_dot = speed(rng);
  return {s, pendulum_observation(s, params)};
}

struct PendulumTransition {
  PendulumState state;
  StepResult result;
};

/// One explicit-Euler step, velocity first. The cost is charged on the
/// pre-step state and the clamped torque.
inline PendulumTransition pendulum_step(const PendulumState& s, double torque, const PendulumParams& params = {}) {
  if (!std::isfinite(torque)) throw std::invalid_argument("pendulum_step: non-finite torque");
  const double u = std::clamp(torque, -params.max_torque, params.max_torque);
  const double th = wrap_angle(s.theta);
  const double cost = th * th + 0.1 * s.theta_dot * s.theta_dot + 0.001 * u * u;

  const double ml2 = params.mass * params.length * params.length;
  const double accel = 3.0 * params.gravity / (2.0 * params.length) * std::sin(s.theta) + 3.0 / ml2 * u;
  PendulumTransition out;
  out.state.theta_dot = std::clamp(s.theta_dot + accel * params.dt, -params.max_speed, params.max_speed);
  out.state.theta = s.theta + out.state.theta_dot * params.dt;
  out.state.steps = s.steps + 1;
  out.result.observation = pendulum_observation(out.state, params);
  out.result.reward = -cost;
  out.result.terminated = false;
  out.result.truncated = out.state.steps >= params.max_steps;
  return out;
}

class Pendulum final : public Environment {
 public:
  explicit Pendulum(PendulumParams params = {}) : params_(params) { params_.validate(); }

  std::string name() const override { return "pendulum"; }
  int obs_dim() const override { return 3; }
  int action_dim() const override { return 1; }
  int max_steps() const override { return params_.max_steps; }

  Vec reset(Rng& rng) override {
    auto r = pendulum_reset(rng, params_);
    state_ = r.state;
    return r.observation;
  }

  StepResult step(const Vec& action) override {
    if (action.size() != 1) throw std::invalid_argument("Pendulum: action must be a 1-vector");
    auto t = pendulum_step(state_, action(0), params_);
    state_ = t.state;
    return t.result;
  }

  std::vector<std::string> state_names() const override { return {"theta", "theta_dot"}; }
  Vec state_vector() const override { return Vec{{state_.theta, state_.theta_dot}}; }

  const PendulumState& state() const { return state_; }
  void set_state(const PendulumState& s) { state_ = s; }
  const PendulumParams& params() const { return params_; }

 private:
  PendulumParams params_;
  PendulumState state_;
};

}  // namespace pgl::envs
