#pragma once

// Plus-configuration quadrotor: gravity plus four motor thrusts, explicit
// Euler integration, hover and circle-tracking rewards.

#include "pgl/envs/env.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pgl::envs {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Quat = Eigen::Quaterniond;

struct QuadParams {
  double mass = 0.5;
  double arm_length = 0.17;
  Vec3 inertia{3.2e-3, 3.2e-3, 5.5e-3};  // diagonal, kg m^2
  double yaw_drag_coeff = 0.016;          // yaw torque per unit thrust, m
  double gravity = 9.81;
  double dt = 0.01;
  int max_steps = 200;

  // reset distribution
  double position_bound = 2.0;   // per axis, m
  double velocity_bound = 6.5;   // per axis, m/s
  double tilt_bound_deg = 30.0;
  double rate_bound = 1.0;       // per axis, rad/s

  // divergence guard
  double max_position = 6.0;
  double max_rate = 40.0;

  double hover_thrust() const { return mass * gravity / 4.0; }
  double max_motor_force() const { return mass * gravity / 2.0; }

  void validate() const {
    if (!(mass > 0 && arm_length > 0 && (inertia.array() > 0).all() && yaw_drag_coeff > 0 && gravity > 0 && dt > 0 &&
          max_steps > 0 && position_bound > 0 && velocity_bound > 0 && tilt_bound_deg >= 0 && rate_bound >= 0 &&
          max_position > 0 && max_rate > 0))
      throw std::invalid_argument("QuadParams: parameters must be positive");
    if (!(hover_thrust() > 0.0 && hover_thrust() < max_motor_force()))
      throw std::invalid_argument("QuadParams: hover thrust must lie inside the motor force range");
  }
};

struct QuadState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();  // body -> world
  Vec3 angular_rate = Vec3::Zero();  // body frame
};

/// Explicit Euler step. Motors sit on the +x, +y, -x, -y arms.
inline QuadState quad_step(const QuadState& s, const Vec4& motor_forces, const QuadParams& params) {
  const Vec4 f = motor_forces.cwiseMax(0.0).cwiseMin(params.max_motor_force());
  const double thrust = (f(0) + f(1)) + (f(2) + f(3));
  const double l = params.arm_length;
  const Vec3 torque{l * (f(1) - f(3)), l * (f(2) - f(0)), params.yaw_drag_coeff * (f(0) - f(1) + f(2) - f(3))};

  const Vec3 accel = Vec3(0.0, 0.0, -params.gravity) + s.attitude * Vec3(0.0, 0.0, thrust / params.mass);
  const Vec3& w = s.angular_rate;
  const Vec3 jw = params.inertia.cwiseProduct(w);
  const Vec3 ang_accel = (torque - w.cross(jw)).cwiseQuotient(params.inertia);

  // q_dot = 0.5 * q (x) (0, w)
  const Quat omega(0.0, w.x(), w.y(), w.z());
  const Quat q_dot_raw = s.attitude * omega;

  QuadState next;
  next.position = s.position + params.dt * s.velocity;
  next.velocity = s.velocity + params.dt * accel;
  next.attitude.coeffs() = s.attitude.coeffs() + 0.5 * params.dt * q_dot_raw.coeffs();
  next.attitude.normalize();
  next.angular_rate = w + params.dt * ang_accel;

  if (!next.position.allFinite() || !next.velocity.allFinite() || !next.attitude.coeffs().allFinite() ||
      !next.angular_rate.allFinite())
    throw DivergenceError("quad_step: state became non-finite");
  return next;
}

/// Motor force = hover offset mg/4 + policy output, clamped to [0, mg/2].
inline Vec4 apply_offset(const Vec& policy_output, const QuadParams& params) {
  if (policy_output.size() != 4) throw std::invalid_argument("apply_offset: expected 4 motor commands");
  Vec4 f;
  for (int i = 0; i < 4; ++i)
    f(i) = std::clamp(params.hover_thrust() + policy_output(i), 0.0, params.max_motor_force());
  return f;
}

inline QuadState quad_reset(Rng& rng, const QuadParams& params) {
  std::uniform_real_distribution<double> pos(-params.position_bound, params.position_bound);
  std::uniform_real_distribution<double> vel(-params.velocity_bound, params.velocity_bound);
  std::uniform_real_distribution<double> rate(-params.rate_bound, params.rate_bound);
  std::uniform_real_distribution<double> tilt(0.0, params.tilt_bound_deg * std::numbers::pi / 180.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  QuadState s;
  s.position = Vec3(pos(rng), pos(rng), pos(rng));
  s.velocity = Vec3(vel(rng), vel(rng), vel(rng));
  Vec3 axis(normal(rng), normal(rng), normal(rng));
  if (axis.norm() < 1e-12) axis = Vec3::UnitZ();
  s.attitude = Quat(Eigen::AngleAxisd(tilt(rng), axis.normalized()));
  s.attitude.normalize();
  s.angular_rate = Vec3(rate(rng), rate(rng), rate(rng));
  return s;
}

/// Geodesic angle between the attitude and the identity, in [0, pi].
inline double attitude_error(const Quat& q) {
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

enum class TaskKind { Hover, Track };

struct TaskSpec {
  TaskKind kind = TaskKind::Hover;
  Vec3 hover_weights{0.3, 0.5, 0.2};  // attitude, position, action
  Vec3 track_weights{0.5, 0.3, 0.2};  // distance, chi, action
  double r_des = 1.0;
  double v_des = 2.0;

  void validate() const {
    const Vec3& w = kind == TaskKind::Hover ? hover_weights : track_weights;
    if ((w.array() < 0.0).any() || w.sum() <= 0.0) throw std::invalid_argument("TaskSpec: weights must be >= 0 and not all 0");
    if (!(r_des > 0 && v_des > 0)) throw std::invalid_argument("TaskSpec: r_des and v_des must be positive");
  }
};

/// Worst-case magnitudes used to normalize rewards into [-1, 0].
struct RewardBounds {
  double position;  // max |p| over the reset box
  double action;    // max |a| for per-motor corrections in [-mg/4, mg/4]
  double distance;  // max distance to the circle from the reset box
  double chi;       // max |chi| over the reset box

  static RewardBounds from(const QuadParams& p, const TaskSpec& task) {
    RewardBounds b;
    b.position = p.position_bound * std::sqrt(3.0);
    b.action = 2.0 * p.hover_thrust();
    b.distance = b.position + task.r_des;
    b.chi = 2.0 * p.position_bound * p.velocity_bound + task.r_des * task.v_des;
    return b;
  }
};

/// Distance from p to the circle of radius r_des in the z = 0 plane.
inline double circle_distance(const Vec3& p, double r_des) {
  const double radial = std::hypot(p.x(), p.y()) - r_des;
  return std::hypot(radial, p.z());
}

/// chi = x v_y - y v_x - r_des v_des
inline double tracking_chi(const Vec3& p, const Vec3& v, double r_des, double v_des) {
  return p.x() * v.y() - p.y() * v.x() - r_des * v_des;
}

inline double hover_reward(const QuadState& s, const Vec& action, const TaskSpec& task, const RewardBounds& bounds) {
  const Vec3& w = task.hover_weights;
  const double raw = -(w(0) * attitude_error(s.attitude) + w(1) * s.position.norm() + w(2) * action.norm());
  const double normalizer = w(0) * std::numbers::pi + w(1) * bounds.position + w(2) * bounds.action;
  return std::max(raw / normalizer, -1.0);
}

inline double track_reward(const QuadState& s, const Vec& action, const TaskSpec& task, const RewardBounds& bounds) {
  const Vec3& w = task.track_weights;
  const double d = circle_distance(s.position, task.r_des);
  const double chi = tracking_chi(s.position, s.velocity, task.r_des, task.v_des);
  const double raw = -(w(0) * d + w(1) * std::abs(chi) + w(2) * action.norm());
  const double normalizer = w(0) * bounds.distance + w(1) * bounds.chi + w(2) * bounds.action;
  return std::max(raw / normalizer, -1.0);
}

inline constexpr double kDefaultDivergencePenalty = 100.0;

class Quadrotor final : public Environment {
 public:
  /// Leaving the divergence guard costs a fixed `divergence_penalty` on the
  /// terminating step. The default, 1 / (1 - 0.99), is the discounted worth of
  /// the worst per-step reward held forever. It does not depend on the step
  /// index, which the observation does not carry.
  Quadrotor(TaskSpec task = {}, QuadParams params = {}, double divergence_penalty = kDefaultDivergencePenalty)
      : task_(task), params_(params), bounds_(RewardBounds::from(params, task)), divergence_penalty_(divergence_penalty) {
    task_.validate();
    params_.validate();
    if (!(divergence_penalty >= 0.0 && std::isfinite(divergence_penalty)))
      throw std::invalid_argument("Quadrotor: divergence_penalty must be finite and >= 0");
  }

  std::string name() const override { return task_.kind == TaskKind::Hover ? "quad-hover" : "quad-track"; }
  int obs_dim() const override { return task_.kind == TaskKind::Hover ? 18 : 20; }
  int action_dim() const override { return 4; }
  int max_steps() const override { return params_.max_steps; }

  Vec reset(Rng& rng) override {
    state_ = quad_reset(rng, params_);
    steps_ = 0;
    return observation();
  }

  StepResult step(const Vec& action) override {
    if (action.size() != 4) throw std::invalid_argument("Quadrotor: action must be a 4-vector");
    if (!action.allFinite()) throw std::invalid_argument("Quadrotor: non-finite action");
    state_ = quad_step(state_, apply_offset(action, params_), params_);
    ++steps_;
    StepResult r;
    r.observation = observation();
    r.reward = reward(state_, action);
    r.terminated = diverged(state_);
    r.truncated = !r.terminated && steps_ >= params_.max_steps;
    if (r.terminated) r.reward -= divergence_penalty_;
    return r;
  }

  double reward(const QuadState& s, const Vec& action) const {
    return task_.kind == TaskKind::Hover ? hover_reward(s, action, task_, bounds_) : track_reward(s, action, task_, bounds_);
  }

  bool diverged(const QuadState& s) const {
    return s.position.norm() > params_.max_position || s.angular_rate.norm() > params_.max_rate;
  }

  Vec observation() const {
    Vec obs(obs_dim());
    const Eigen::Matrix3d rot = state_.attitude.toRotationMatrix();
    obs.segment<3>(0) = state_.position / params_.position_bound;
    obs.segment<3>(3) = state_.velocity / params_.velocity_bound;
    for (int r = 0; r < 3; ++r) obs.segment<3>(6 + 3 * r) = rot.row(r).transpose();
    obs.segment<3>(15) = state_.angular_rate;
    if (task_.kind == TaskKind::Track) {
      obs(18) = circle_distance(state_.position, task_.r_des);
      obs(19) = tracking_chi(state_.position, state_.velocity, task_.r_des, task_.v_des) / (task_.r_des * task_.v_des);
    }
    return obs;
  }

  std::vector<std::string> state_names() const override {
    return {"px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz"};
  }
  Vec state_vector() const override {
    Vec v(13);
    v << state_.position, state_.velocity, state_.attitude.w(), state_.attitude.x(), state_.attitude.y(),
        state_.attitude.z(), state_.angular_rate;
    return v;
  }

  const QuadState& state() const { return state_; }
  void set_state(const QuadState& s, int steps = 0) {
    state_ = s;
    steps_ = steps;
  }
  const QuadParams& params() const { return params_; }
  const TaskSpec& task() const { return task_; }
  const RewardBounds& bounds() const { return bounds_; }

 private:
  TaskSpec task_;
  QuadParams params_;
  RewardBounds bounds_;
  double divergence_penalty_;
  QuadState state_;
  int steps_ = 0;
};

}  // namespace pgl::envs
