#pragma once

// Randomized self-check of the exact MDP oracle and the clip identity.

#include "pgl/mdp_oracle.hpp"
#include "pgl/objectives.hpp"

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace pgl::runtime {

inline constexpr double kIdentityTolerance = 1e-10;
inline constexpr double kImprovementTolerance = 1e-12;
inline constexpr double kGradientTolerance = 1e-6;
inline constexpr double kClipTolerance = 1e-12;
inline constexpr int kClipTriplesPerTrial = 1000;
inline constexpr double kCorruption = 1e-6;

struct OracleRow {
  std::string check;
  int trial = 0;
  int states = 0;
  int actions = 0;
  double gamma = 0.0;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct OracleReport {
  std::vector<OracleRow> rows;

  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }
};

inline void write_oracle_csv(std::ostream& out, const OracleReport& report) {
  out << "check,trial,states,actions,gamma,value,threshold,pass\n";
  for (const auto& r : report.rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6e,%.1e", r.value, r.threshold);
    out << r.check << ',' << r.trial << ',' << r.states << ',' << r.actions << ',' << r.gamma << ',' << buf << ','
        << (r.pass ? 1 : 0) << '\n';
  }
}

/// Random tabular instance for one trial: 1-5 states, 1-3 actions, gamma
/// cycling through 0.5, 0.9, 0.99.
inline mdp::FiniteMdp oracle_trial_mdp(int trial, Rng& rng) {
  static constexpr double kGammas[] = {0.5, 0.9, 0.99};
  std::uniform_int_distribution<int> states(1, 5), actions(1, 3);
  const int s = states(rng);
  const int a = actions(rng);
  return mdp::random_mdp(s, a, kGammas[trial % 3], rng);
}

/// With `corrupt`, the mu-advantage identity is evaluated against a right-hand
/// side offset by 1e-6, so the report must fail.
inline OracleReport verify_oracle(std::uint64_t seed, int trials, bool corrupt = false) {
  Rng rng(seed);
  OracleReport report;
  std::uniform_real_distribution<double> ratio_dist(0.01, 5.0), adv_dist(-10.0, 10.0), eps_dist(0.01, 0.5),
      logit_dist(-2.0, 2.0);
  for (int t = 0; t < trials; ++t) {
    const mdp::FiniteMdp m = oracle_trial_mdp(t, rng);
    auto row = [&](std::string check, double value, double threshold, bool pass) {
      report.rows.push_back({std::move(check), t, m.n_states, m.n_actions, m.gamma, value, threshold, pass});
    };

    const mdp::TabularPolicy mu = mdp::random_policy(m.n_states, m.n_actions, rng);
    const mdp::TabularPolicy pi = mdp::random_policy(m.n_states, m.n_actions, rng);
    const mdp::DifferenceResiduals res = mdp::performance_difference_residuals(m, pi, mu, corrupt ? kCorruption : 0.0);
    row("advantage_form", res.advantage_form, kIdentityTolerance, res.advantage_form <= kIdentityTolerance);
    row("mu_advantage", res.mu_advantage, kIdentityTolerance, res.mu_advantage <= kIdentityTolerance);
    row("pi_advantage", res.pi_advantage, kIdentityTolerance, res.pi_advantage <= kIdentityTolerance);

    const mdp::TabularPolicy improved = mdp::improve_towards_positive_advantage(m, mu, rng);
    const mdp::DominatingReport dom = mdp::check_dominating(m, improved, mu, mdp::DominatingCondition::RatioMuAdvantage, 1e-12);
    const double gain = dom.eta_pi - dom.eta_mu;
    row("dominating_condition_2", gain, -kImprovementTolerance, dom.holds_everywhere && gain >= -kImprovementTolerance);

    Mat logits(m.n_states, m.n_actions);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = logit_dist(rng);
    const mdp::GradientCheck g = mdp::policy_gradient_check(m, logits);
    row("policy_gradient_fd", g.max_relative_error, kGradientTolerance, g.max_relative_error <= kGradientTolerance);
    row("policy_gradient_forms", g.max_form_gap, kIdentityTolerance, g.max_form_gap <= kIdentityTolerance);

    double worst = 0.0;
    for (int k = 0; k < kClipTriplesPerTrial; ++k) {
      const double r = ratio_dist(rng), a = adv_dist(rng), e = eps_dist(rng);
      worst = std::max(worst, clip_identity_residual(r, a, e));
    }
    row("clip_identity", worst, kClipTolerance, worst <= kClipTolerance);
  }
  return report;
}

}  // namespace pgl::runtime
