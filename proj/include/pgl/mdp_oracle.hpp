#pragma once

// Exact tabular evaluation on small finite MDPs: V, Q, A, discounted state
// visitation and expected return by dense linear solves, plus numerical checks
// of the performance-difference identities, the dominating inequalities, and
// the policy gradient theorem for a softmax policy.

#include "pgl/nn.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace pgl::mdp {

struct FiniteMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Mat> transition;  // transition[a](s, s') = P(s' | s, a)
  Mat reward;                   // reward(s, a)
  double gamma = 0.9;
  Vec initial_dist;

  void validate(double tol = 1e-12) const {
    if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("FiniteMdp: empty state or action set");
    if (static_cast<int>(transition.size()) != n_actions) throw std::invalid_argument("FiniteMdp: one transition matrix per action");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("FiniteMdp: gamma must lie in (0, 1)");
    if (reward.rows() != n_states || reward.cols() != n_actions) throw std::invalid_argument("FiniteMdp: reward shape");
    for (const Mat& p : transition) {
      if (p.rows() != n_states || p.cols() != n_states) throw std::invalid_argument("FiniteMdp: transition shape");
      if ((p.array() < 0.0).any()) throw std::invalid_argument("FiniteMdp: negative transition probability");
      if (((p.rowwise().sum().array() - 1.0).abs() > tol).any()) throw std::invalid_argument("FiniteMdp: transition rows must sum to 1");
    }
    if (initial_dist.size() != n_states || (initial_dist.array() < 0.0).any() || std::abs(initial_dist.sum() - 1.0) > tol)
      throw std::invalid_argument("FiniteMdp: initial distribution must be a probability vector");
  }
};

struct TabularPolicy {
  Mat probs;  // probs(s, a)

  void validate(double tol = 1e-12) const {
    if ((probs.array() < 0.0).any()) throw std::invalid_argument("TabularPolicy: negative probability");
    if (((probs.rowwise().sum().array() - 1.0).abs() > tol).any()) throw std::invalid_argument("TabularPolicy: rows must sum to 1");
  }
};

inline void check_compatible(const FiniteMdp& mdp, const TabularPolicy& policy) {
  if (policy.probs.rows() != mdp.n_states || policy.probs.cols() != mdp.n_actions)
    throw std::invalid_argument("policy shape does not match the MDP");
}

/// P^pi(s, s') = sum_a pi(a|s) P(s'|s,a)
inline Mat policy_transition(const FiniteMdp& mdp, const TabularPolicy& policy) {
  check_compatible(mdp, policy);
  Mat p = Mat::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a) p += policy.probs.col(a).asDiagonal() * mdp.transition[a];
  return p;
}

/// R^pi(s) = sum_a pi(a|s) R(s, a)
inline Vec policy_reward(const FiniteMdp& mdp, const TabularPolicy& policy) {
  check_compatible(mdp, policy);
  return mdp.reward.cwiseProduct(policy.probs).rowwise().sum();
}

namespace detail {
inline Vec solve_or_throw(const Mat& system, const Vec& rhs) {
  Eigen::FullPivLU<Mat> lu(system);
  if (!lu.isInvertible()) throw std::logic_error("mdp oracle: singular linear system");
  return lu.solve(rhs);
}
}  // namespace detail

/// Solves (I - gamma P^pi) V = R^pi.
inline Vec exact_state_values(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const Mat system = Mat::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * policy_transition(mdp, policy);
  return detail::solve_or_throw(system, policy_reward(mdp, policy));
}

/// Q(s, a) = R(s, a) + gamma sum_s' P(s'|s,a) V(s')
inline Mat q_from_values(const FiniteMdp& mdp, const Vec& values) {
  Mat q = mdp.reward;
  for (int a = 0; a < mdp.n_actions; ++a) q.col(a) += mdp.gamma * mdp.transition[a] * values;
  return q;
}

inline Mat exact_q_values(const FiniteMdp& mdp, const TabularPolicy& policy) {
  return q_from_values(mdp, exact_state_values(mdp, policy));
}

inline Mat exact_advantages(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const Vec v = exact_state_values(mdp, policy);
  Mat q = q_from_values(mdp, v);
  q.colwise() -= v;
  return q;
}

/// rho^pi(s) = sum_t gamma^t Pr(s_t = s); solves rho = rho_0 + gamma (P^pi)^T rho.
inline Vec discounted_visitation(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const Mat system = Mat::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * policy_transition(mdp, policy).transpose();
  return detail::solve_or_throw(system, mdp.initial_dist);
}

inline double expected_return(const FiniteMdp& mdp, const TabularPolicy& policy) {
  return mdp.initial_dist.dot(exact_state_values(mdp, policy));
}

struct DifferenceResiduals {
  double advantage_form = 0.0;   // eta(pi) - eta(mu) - sum rho^pi sum pi A^mu
  double mu_advantage = 0.0;     // eta(pi) - eta(mu) - sum rho^pi sum (pi - mu) A^mu
  double pi_advantage = 0.0;     // eta(pi) - eta(mu) - sum rho^mu sum (pi - mu) A^pi

  double max() const { return std::max({advantage_form, mu_advantage, pi_advantage}); }
};

/// Absolute residuals of the three performance-difference identities.
/// `perturb` is added to the right-hand side of the mu-advantage form; it
/// exists only for fault-injection self tests.
inline DifferenceResiduals performance_difference_residuals(const FiniteMdp& mdp, const TabularPolicy& pi,
                                                            const TabularPolicy& mu, double perturb = 0.0) {
  const double gap = expected_return(mdp, pi) - expected_return(mdp, mu);
  const Mat adv_mu = exact_advantages(mdp, mu);
  const Mat adv_pi = exact_advantages(mdp, pi);
  const Vec rho_pi = discounted_visitation(mdp, pi);
  const Vec rho_mu = discounted_visitation(mdp, mu);
  const Mat diff = pi.probs - mu.probs;

  DifferenceResiduals r;
  r.advantage_form = std::abs(gap - rho_pi.dot(pi.probs.cwiseProduct(adv_mu).rowwise().sum()));
  r.mu_advantage = std::abs(gap - (rho_pi.dot(diff.cwiseProduct(adv_mu).rowwise().sum()) + perturb));
  r.pi_advantage = std::abs(gap - rho_mu.dot(diff.cwiseProduct(adv_pi).rowwise().sum()));
  return r;
}

/// Which of the four per-(s, a) dominating inequalities to test.
enum class DominatingCondition {
  DiffMuAdvantage = 1,    // (pi - mu) A^mu >= 0
  RatioMuAdvantage = 2,   // (pi/mu - 1) A^mu >= 0
  DiffPiAdvantage = 3,    // (pi - mu) A^pi >= 0
  RatioPiAdvantage = 4,   // (pi/mu - 1) A^pi >= 0
};

inline constexpr double kMinBehaviorProb = 1e-12;

struct DominatingReport {
  bool holds_everywhere = true;
  double min_lhs = 0.0;  // smallest evaluated left-hand side
  int skipped_pairs = 0; // ratio forms: (s, a) with mu(a|s) < 1e-12
  double eta_pi = 0.0;
  double eta_mu = 0.0;
  bool improved() const { return eta_pi >= eta_mu; }
};

inline DominatingReport check_dominating(const FiniteMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                                         DominatingCondition condition, double tol = 0.0) {
  const int idx = static_cast<int>(condition);
  if (idx < 1 || idx > 4) throw std::invalid_argument("check_dominating: condition index must be 1..4");
  const bool use_mu_adv = idx <= 2;
  const bool ratio_form = idx == 2 || idx == 4;
  const Mat adv = use_mu_adv ? exact_advantages(mdp, mu) : exact_advantages(mdp, pi);

  DominatingReport report;
  report.min_lhs = std::numeric_limits<double>::infinity();
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double lhs;
      if (ratio_form) {
        if (mu.probs(s, a) < kMinBehaviorProb) {
          ++report.skipped_pairs;
          continue;
        }
        lhs = (pi.probs(s, a) / mu.probs(s, a) - 1.0) * adv(s, a);
      } else {
        lhs = (pi.probs(s, a) - mu.probs(s, a)) * adv(s, a);
      }
      report.min_lhs = std::min(report.min_lhs, lhs);
      if (lhs < -tol) report.holds_everywhere = false;
    }
  }
  report.eta_pi = expected_return(mdp, pi);
  report.eta_mu = expected_return(mdp, mu);
  return report;
}

inline TabularPolicy softmax_policy(const Mat& logits) {
  Mat probs(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const Eigen::RowVectorXd shifted = logits.row(s).array() - logits.row(s).maxCoeff();
    const Eigen::RowVectorXd e = shifted.array().exp();
    probs.row(s) = e / e.sum();
  }
  return {probs};
}

struct GradientCheck {
  Mat q_form;                      // d eta / d logits via the Q form
  Mat a_form;                      // same via the advantage form
  Mat finite_difference;
  double max_relative_error = 0.0; // Q form vs finite differences
  double max_form_gap = 0.0;       // |Q form - A form|, max entry
};

/// Analytic softmax policy gradient in both the Q and the advantage form,
/// compared against central differences of expected_return.
inline GradientCheck policy_gradient_check(const FiniteMdp& mdp, const Mat& logits, double h = 1e-5) {
  const TabularPolicy pi = softmax_policy(logits);
  const Vec rho = discounted_visitation(mdp, pi);
  const Mat q = exact_q_values(mdp, pi);
  const Mat adv = exact_advantages(mdp, pi);
  const int S = mdp.n_states, A = mdp.n_actions;

  GradientCheck out{Mat::Zero(S, A), Mat::Zero(S, A), Mat::Zero(S, A)};
  for (int s = 0; s < S; ++s) {
    for (int b = 0; b < A; ++b) {
      double gq = 0.0, ga = 0.0;
      for (int a = 0; a < A; ++a) {
        // d pi(a|s) / d logit(s, b)
        const double dpi = pi.probs(s, a) * ((a == b ? 1.0 : 0.0) - pi.probs(s, b));
        gq += dpi * q(s, a);
        ga += dpi * adv(s, a);
      }
      out.q_form(s, b) = rho(s) * gq;
      out.a_form(s, b) = rho(s) * ga;
    }
  }
  Mat probe = logits;
  for (int s = 0; s < S; ++s) {
    for (int b = 0; b < A; ++b) {
      const double orig = probe(s, b);
      probe(s, b) = orig + h;
      const double up = expected_return(mdp, softmax_policy(probe));
      probe(s, b) = orig - h;
      const double down = expected_return(mdp, softmax_policy(probe));
      probe(s, b) = orig;
      out.finite_difference(s, b) = (up - down) / (2.0 * h);
    }
  }
  const Eigen::Map<const Vec> qf(out.q_form.data(), out.q_form.size());
  const Eigen::Map<const Vec> fd(out.finite_difference.data(), out.finite_difference.size());
  out.max_relative_error = max_relative_error(qf, fd, 1e-6);
  out.max_form_gap = (out.q_form - out.a_form).cwiseAbs().maxCoeff();
  return out;
}

// Random instance generators. Transition rows and policies are Dirichlet(1).

inline Vec dirichlet_ones(int n, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = expo(rng);
  return v / v.sum();
}

inline FiniteMdp random_mdp(int n_states, int n_actions, double gamma, Rng& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  FiniteMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition.assign(n_actions, Mat(n_states, n_states));
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states; ++s) mdp.transition[a].row(s) = dirichlet_ones(n_states, rng).transpose();
  mdp.reward.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) mdp.reward(s, a) = unif(rng);
  mdp.initial_dist = dirichlet_ones(n_states, rng);
  return mdp;
}

inline TabularPolicy random_policy(int n_states, int n_actions, Rng& rng) {
  TabularPolicy p{Mat(n_states, n_actions)};
  for (int s = 0; s < n_states; ++s) p.probs.row(s) = dirichlet_ones(n_actions, rng).transpose();
  return p;
}

/// Builds pi from mu so that (pi/mu - 1) A^mu >= 0 at every (s, a): a random
/// fraction of the mass on negative-advantage actions moves to
/// positive-advantage actions. Zero-advantage actions keep their mass.
inline TabularPolicy improve_towards_positive_advantage(const FiniteMdp& mdp, const TabularPolicy& mu, Rng& rng) {
  const Mat adv = exact_advantages(mdp, mu);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TabularPolicy pi = mu;
  for (int s = 0; s < mdp.n_states; ++s) {
    const double frac = unif(rng);
    double moved = 0.0;
    std::vector<int> positive;
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (adv(s, a) < 0.0) {
        moved += frac * mu.probs(s, a);
        pi.probs(s, a) = (1.0 - frac) * mu.probs(s, a);
      } else if (adv(s, a) > 0.0) {
        positive.push_back(a);
      }
    }
    if (positive.empty()) {
      pi.probs.row(s) = mu.probs.row(s);
      continue;
    }
    Vec share = dirichlet_ones(static_cast<int>(positive.size()), rng);
    for (std::size_t k = 0; k < positive.size(); ++k) pi.probs(s, positive[k]) += moved * share(static_cast<Eigen::Index>(k));
  }
  return pi;
}

}  // namespace pgl::mdp
