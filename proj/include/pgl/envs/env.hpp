#pragma once

#include "pgl/nn.hpp"

#include <memory>
#include <string>
#include <vector>

namespace pgl::envs {

/// The simulation left the range where its state is meaningful.
class DivergenceError : public NonFiniteError {
 public:
  using NonFiniteError::NonFiniteError;
};

struct StepResult {
  Vec observation;
  double reward = 0.0;
  bool terminated = false;  // true environment terminal: bootstrap value is 0
  bool truncated = false;   // time-limit cutoff: bootstrap from V(s_n)
};

/// Single-owner stepping interface shared by the pendulum and the quadrotor.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int max_steps() const = 0;

  virtual Vec reset(Rng& rng) = 0;
  virtual StepResult step(const Vec& action) = 0;

  /// Flat physical state, for trajectory dumps.
  virtual std::vector<std::string> state_names() const = 0;
  virtual Vec state_vector() const = 0;
};

}  // namespace pgl::envs
