// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Usage: acceptance [criterion ...]   (default: all)

#include "pgl/runtime/evaluate.hpp"
#include "pgl/runtime/trainer.hpp"
#include "pgl/runtime/verify.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

using namespace pgl;
using namespace pgl::runtime;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

Vec normal_vec(int n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

// ---------------------------------------------------------------- 1
Verdict oracle_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst[3] = {0, 0, 0};
  for (int t = 0; t < 100; ++t) {
    const mdp::FiniteMdp m = oracle_trial_mdp(t, rng);
    const auto mu = mdp::random_policy(m.n_states, m.n_actions, rng);
    const auto pi = mdp::random_policy(m.n_states, m.n_actions, rng);
    const auto r = mdp::performance_difference_residuals(m, pi, mu);
    worst[0] = std::max(worst[0], r.advantage_form);
    worst[1] = std::max(worst[1], r.mu_advantage);
    worst[2] = std::max(worst[2], r.pi_advantage);
  }
  const double secs = seconds_since(t0);
  const double w = std::max({worst[0], worst[1], worst[2]});
  return {w <= 1e-10 && secs < 10.0,
          "max residuals " + fmt("%.2e", worst[0]) + " / " + fmt("%.2e", worst[1]) + " / " + fmt("%.2e", worst[2]) +
              ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 2
Verdict dominating_condition() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(202);
  double min_gain = std::numeric_limits<double>::infinity();
  int condition_held = 0;
  for (int t = 0; t < 1000; ++t) {
    const mdp::FiniteMdp m = oracle_trial_mdp(t, rng);
    const auto mu = mdp::random_policy(m.n_states, m.n_actions, rng);
    const auto pi = mdp::improve_towards_positive_advantage(m, mu, rng);
    const auto rep = mdp::check_dominating(m, pi, mu, mdp::DominatingCondition::RatioMuAdvantage, 1e-12);
    condition_held += rep.holds_everywhere;
    min_gain = std::min(min_gain, rep.eta_pi - rep.eta_mu);
  }
  const double secs = seconds_since(t0);
  return {condition_held == 1000 && min_gain >= -1e-12 && secs < 30.0,
          std::to_string(condition_held) + "/1000 constructive, min eta(pi)-eta(mu) " + fmt("%.3e", min_gain) + ", " +
              fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 3
Verdict clip_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(303);
  std::uniform_real_distribution<double> rd(0.01, 5.0), ad(-10.0, 10.0), ed(0.01, 0.5);
  double worst = 0.0, worst_deriv = 0.0;
  int compared = 0;
  for (int k = 0; k < 100000; ++k) {
    const double r = rd(rng), a = ad(rng), e = ed(rng);
    const double residual = ppo_clip_objective(r, a, e) - a - perceptron_policy_objective(r, a, e);
    worst = std::max(worst, std::abs(residual));
    if (std::abs(r - 1.0 - e) > 1e-9 && std::abs(r - 1.0 + e) > 1e-9 && a != 0.0) {
      worst_deriv = std::max(worst_deriv,
                             std::abs(ppo_clip_ratio_derivative(r, a, e) - perceptron_ratio_derivative(r, a, e)));
      ++compared;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && worst_deriv <= 1e-12 && secs < 5.0,
          "max residual " + fmt("%.2e", worst) + ", max d/dr gap " + fmt("%.2e", worst_deriv) + " over " +
              std::to_string(compared) + " interior triples, " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 4
struct Instance {
  GaussianPolicy policy;
  TrajectoryBatch batch;
  AdvantageResult adv;
  DenseNet value_net;
};

Instance random_instance(Rng& rng) {
  Instance in{make_gaussian_policy(4, 2, {8, 8}, rng, -0.3, 1.0), {}, {}, DenseNet({4, 8, 1})};
  init_orthogonal(in.value_net, rng);
  const int n = 6;
  std::uniform_real_distribution<double> shift(-0.4, 0.4);
  in.batch.observations.resize(n + 1, 4);
  in.batch.actions.resize(n, 2);
  for (int i = 0; i <= n; ++i) in.batch.observations.row(i) = normal_vec(4, rng).transpose();
  for (int i = 0; i < n; ++i) {
    const Vec obs = in.batch.observations.row(i).transpose();
    in.batch.actions.row(i) = (mean_action(in.policy, obs) + normal_vec(2, rng)).transpose();
    const double lp = log_prob(in.policy, obs, in.batch.actions.row(i).transpose());
    in.batch.target_log_probs.push_back(lp);
    in.batch.behavior_log_probs.push_back(lp + shift(rng));
    in.batch.rewards.push_back(0.0);
    in.adv.a_trace.push_back(normal_vec(1, rng)(0));
    in.adv.v_trace.push_back(normal_vec(1, rng)(0));
  }
  in.batch.values.assign(n + 1, 0.0);
  return in;
}

bool away_from_kinks(const Instance& in, double eps) {
  for (int i = 0; i < in.batch.size(); ++i) {
    const double r = std::exp(log_prob(in.policy, in.batch.observations.row(i).transpose(), in.batch.actions.row(i).transpose()) -
                              in.batch.behavior_log_probs[i]);
    const double a = in.adv.a_trace[i];
    if (std::abs((r - 1.0) - eps * (a > 0 ? 1.0 : -1.0)) < 1e-3) return false;
  }
  return true;
}

Verdict gradient_integrity() {
  Rng rng(404);
  const LossConfig loss{0.2, 0.99};
  double worst_lp = 0.0, worst_pol = 0.0, worst_val = 0.0, worst_tab = 0.0;
  int done = 0;
  while (done < 100) {
    const Instance in = random_instance(rng);
    if (!away_from_kinks(in, loss.epsilon)) continue;
    GaussianPolicy probe = in.policy;
    const Vec obs = in.batch.observations.row(0).transpose();
    const Vec act = in.batch.actions.row(0).transpose();
    worst_lp = std::max(worst_lp, max_relative_error(log_prob_gradient(in.policy, obs, act),
                                                     central_difference(
                                                         [&](const Vec& th) {
                                                           probe.set_flat_params(th);
                                                           return log_prob(probe, obs, act);
                                                         },
                                                         in.policy.flat_params())));
    worst_pol = std::max(worst_pol, max_relative_error(policy_loss(in.batch, in.adv, in.policy, loss).gradient,
                                                       central_difference(
                                                           [&](const Vec& th) {
                                                             probe.set_flat_params(th);
                                                             return policy_loss(in.batch, in.adv, probe, loss).loss;
                                                           },
                                                           in.policy.flat_params())));
    DenseNet vprobe = in.value_net;
    worst_val = std::max(worst_val, max_relative_error(value_loss(in.batch, in.adv, in.value_net).gradient,
                                                       central_difference(
                                                           [&](const Vec& th) {
                                                             vprobe.params() = th;
                                                             return value_loss(in.batch, in.adv, vprobe).loss;
                                                           },
                                                           in.value_net.params())));
    ++done;
  }
  std::uniform_real_distribution<double> logit(-2.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const mdp::FiniteMdp m = oracle_trial_mdp(t, rng);
    Mat logits(m.n_states, m.n_actions);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = logit(rng);
    worst_tab = std::max(worst_tab, mdp::policy_gradient_check(m, logits).max_relative_error);
  }
  const bool pass = worst_lp <= 1e-4 && worst_pol <= 1e-4 && worst_val <= 1e-4 && worst_tab <= 1e-6;
  return {pass, "max rel err log_prob " + fmt("%.1e", worst_lp) + ", L_policy " + fmt("%.1e", worst_pol) + ", L_value " +
                    fmt("%.1e", worst_val) + ", tabular " + fmt("%.1e", worst_tab)};
}

// ---------------------------------------------------------------- 5
// Closed-form sum: A_i = sum_{t>=i} gamma^{t-i} (prod_{i<j<=t} c_j) delta_t.
AdvantageResult straight_line(const TrajectoryBatch& b, double gamma) {
  const int n = b.size();
  AdvantageResult out{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < n; ++i) {
    double a = 0.0, weight = 1.0;
    for (int t = i; t < n; ++t) {
      if (t > i) weight *= gamma * std::min(1.0, std::exp(b.target_log_probs[t] - b.behavior_log_probs[t]));
      a += weight * (b.rewards[t] + gamma * b.values[t + 1] - b.values[t]);
    }
    out.a_trace[i] = a;
    out.v_trace[i] = b.values[i] + std::min(1.0, std::exp(b.target_log_probs[i] - b.behavior_log_probs[i])) * a;
  }
  return out;
}

Verdict vtrace_correctness() {
  Rng rng(505);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_real_distribution<double> gam(0.5, 0.999), lp(-1.0, 1.0);
  double worst = 0.0, worst_rtg = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const int n = len(rng);
    const double gamma = gam(rng);
    TrajectoryBatch b;
    b.rewards.resize(n);
    b.values.resize(n + 1);
    for (double& r : b.rewards) r = normal_vec(1, rng)(0);
    for (double& v : b.values) v = normal_vec(1, rng)(0);
    for (int i = 0; i < n; ++i) {
      b.behavior_log_probs.push_back(lp(rng));
      b.target_log_probs.push_back(lp(rng));
    }
    const AdvantageResult got = vtrace(b, gamma), want = straight_line(b, gamma);
    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(got.a_trace[i] - want.a_trace[i]) / std::max(1.0, std::abs(want.a_trace[i])));
      worst = std::max(worst, std::abs(got.v_trace[i] - want.v_trace[i]) / std::max(1.0, std::abs(want.v_trace[i])));
    }
    b.target_log_probs = b.behavior_log_probs;
    std::fill(b.values.begin(), b.values.end(), 0.0);
    const AdvantageResult on = vtrace(b, gamma);
    for (int i = 0; i < n; ++i) {
      double rtg = 0.0, disc = 1.0;
      for (int t = i; t < n; ++t, disc *= gamma) rtg += disc * b.rewards[t];
      worst_rtg = std::max(worst_rtg, std::abs(on.v_trace[i] - rtg));
    }
  }
  return {worst <= 1e-12 && worst_rtg <= 1e-12,
          "max rel gap to straight-line sum " + fmt("%.1e", worst) + ", max gap to reward-to-go " + fmt("%.1e", worst_rtg)};
}

// ---------------------------------------------------------------- 6, 7, 10
TrainConfig load_named(const std::string& name, std::uint64_t seed) {
  TrainConfig c = load_config(std::string(PGL_CONFIG_DIR) + "/" + name);
  c.seed = seed;
  c.deterministic = true;
  return c;
}

double improvement(const std::vector<double>& returns, int window) {
  if (static_cast<int>(returns.size()) < 2 * window) return std::numeric_limits<double>::quiet_NaN();
  double base = 0.0;
  for (int i = 0; i < window; ++i) base += returns[i];
  base /= window;
  const double final = trailing_mean(returns, window);
  return (final - base) / std::abs(base);
}

Verdict pendulum_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const TrainConfig c = load_named("pendulum.conf", seed);
    const TrainResult r = train(c);
    const double imp = improvement(r.episode_returns, 20);
    wins += imp >= 0.6;
    detail += "seed " + std::to_string(seed) + ": " + fmt("%+.0f%%", 100 * imp) + " (" + std::to_string(r.env_steps) +
              " steps); ";
    std::cout << "  [6] " << detail.substr(detail.rfind("seed")) << std::flush << '\n';
  }
  const double secs = seconds_since(t0);
  return {wins >= 2 && secs <= 900.0, detail + fmt("%.0f s", secs)};
}

Verdict quad_hover() {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const TrainConfig c = load_named("quad-hover.conf", seed);
    const TrainResult r = train(c);
    const double imp = improvement(r.episode_returns, 20);
    auto env = make_environment(c);
    Rng eval_rng = make_rng(seed, 99);
    const EvalSummary ev = evaluate(r.policy.mean_net, *env, 20, eval_rng);
    const double e0 = ev.median_initial_position_error(), e1 = ev.median_final_position_error();
    const bool ok = imp >= 0.5 && e1 < e0;
    wins += ok;
    const std::string line = "seed " + std::to_string(seed) + ": " + fmt("%+.0f%%", 100 * imp) + ", median pos err " +
                             fmt("%.3f", e0) + " -> " + fmt("%.3f", e1) + " (" + std::to_string(r.env_steps) + " steps)";
    std::cout << "  [7] " << line << std::flush << '\n';
    detail += line + "; ";
  }
  const double secs = seconds_since(t0);
  return {wins >= 2 && secs <= 3600.0, detail + fmt("%.0f s", secs)};
}

double mean_radial_error(const DenseNet& net, envs::Environment& env) {
  Rng rng(1010);
  const EvalSummary ev = evaluate(net, env, 20, rng);
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& e : ev.episodes)
    for (double d : e.radial_error) s += d, ++n;
  return s / static_cast<double>(n);
}

Verdict track_geometry() {
  envs::TaskSpec task;
  task.kind = envs::TaskKind::Track;
  const envs::QuadParams p;
  const envs::RewardBounds bounds = envs::RewardBounds::from(p, task);
  bool exact = true;
  Rng rng(1001);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (int k = 0; k < 1000; ++k) {
    const double phi = ang(rng);
    const envs::Vec3 pos(task.r_des * std::cos(phi), task.r_des * std::sin(phi), 0.0);
    const envs::Vec3 vel(-task.v_des * std::sin(phi), task.v_des * std::cos(phi), 0.0);
    // exact zeros where the point is representable on the circle, else within rounding
    const envs::Vec3 on_axis(task.r_des, 0.0, 0.0), v_axis(0.0, task.v_des, 0.0);
    exact = exact && envs::circle_distance(on_axis, task.r_des) == 0.0 &&
            envs::tracking_chi(on_axis, v_axis, task.r_des, task.v_des) == 0.0;
    exact = exact && envs::circle_distance(pos, task.r_des) < 1e-15 &&
            std::abs(envs::tracking_chi(pos, vel, task.r_des, task.v_des)) < 1e-14;
  }
  double worst_rot = 0.0;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    envs::QuadState s;
    s.position = envs::Vec3(g(rng), g(rng), g(rng));
    s.velocity = envs::Vec3(g(rng), g(rng), g(rng));
    s.attitude = envs::Quat(Eigen::AngleAxisd(ang(rng), envs::Vec3(g(rng), g(rng), g(rng)).normalized()));
    s.angular_rate = envs::Vec3(g(rng), g(rng), g(rng));
    const Vec a = normal_vec(4, rng, 0.5);
    const Eigen::Matrix3d rz = Eigen::AngleAxisd(ang(rng), envs::Vec3::UnitZ()).toRotationMatrix();
    envs::QuadState r = s;
    r.position = rz * s.position;
    r.velocity = rz * s.velocity;
    worst_rot = std::max(worst_rot, std::abs(envs::track_reward(s, a, task, bounds) - envs::track_reward(r, a, task, bounds)));
  }

  // Scaled run: evaluate at evenly spaced checkpoints and fit a slope.
  const TrainConfig c = load_named("quad-track.conf", 0);
  auto env = make_environment(c);
  std::vector<double> xs, ys;
  const std::int64_t every = 1000;
  auto [policy0, value0] = initial_networks(c, env->obs_dim(), env->action_dim());
  xs.push_back(0);
  ys.push_back(mean_radial_error(policy0.mean_net, *env));
  const TrainResult r = train(c, nullptr, [&](std::int64_t j, const ParamSnapshot& snap) {
    if (j % every == 0) {
      xs.push_back(static_cast<double>(j));
      ys.push_back(mean_radial_error(snap.policy.mean_net, *env));
    }
  });
  xs.push_back(static_cast<double>(r.trajectories));
  ys.push_back(mean_radial_error(r.policy.mean_net, *env));
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) sxy += (xs[k] - mx) * (ys[k] - my), sxx += (xs[k] - mx) * (xs[k] - mx);
  const double slope = sxy / sxx;
  std::string series;
  for (double y : ys) series += fmt("%.3f ", y);
  return {exact && worst_rot <= 1e-12 && slope < 0.0 && ys.back() < ys.front(),
          std::string(exact ? "on-circle d=chi=0" : "on-circle check FAILED") + ", max rotation gap " +
              fmt("%.1e", worst_rot) + ", radial error over " + std::to_string(r.env_steps) + " steps: " + series +
              "(slope " + fmt("%.2e", slope) + " per trajectory)"};
}

// ---------------------------------------------------------------- 8
Verdict dynamics_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const envs::QuadParams p;
  envs::QuadState rest;
  std::vector<std::pair<std::string, double>> gaps;
  const envs::QuadState hover = envs::quad_step(rest, envs::Vec4::Constant(p.hover_thrust()), p);
  gaps.emplace_back("hover", (hover.position.norm() + hover.velocity.norm() + hover.angular_rate.norm() +
                              (hover.attitude.coeffs() - envs::Quat::Identity().coeffs()).norm()));
  const envs::QuadState fall = envs::quad_step(rest, envs::Vec4::Zero(), p);
  gaps.emplace_back("free fall", std::abs(fall.velocity.z() + 0.0981));
  envs::Vec4 f = envs::Vec4::Constant(p.hover_thrust());
  f(1) += 0.05;
  f(3) -= 0.05;
  gaps.emplace_back("roll", std::abs(envs::quad_step(rest, f, p).angular_rate.x() / p.dt - 5.3125));
  f = envs::Vec4::Constant(p.hover_thrust());
  f(2) += 0.1;
  const envs::QuadState pitch = envs::quad_step(rest, f, p);
  gaps.emplace_back("pitch", std::abs(pitch.angular_rate.y() / p.dt - 0.17 * 0.1 / 3.2e-3));
  gaps.emplace_back("yaw", std::abs(pitch.angular_rate.z() / p.dt - 0.016 * 0.1 / 5.5e-3));
  const double secs = seconds_since(t0);
  bool pass = secs < 1.0;
  std::string detail;
  for (const auto& [name, gap] : gaps) {
    pass = pass && gap <= 1e-12;
    detail += name + " " + fmt("%.1e", gap) + ", ";
  }
  return {pass, detail + fmt("%.4f s", secs)};
}

// ---------------------------------------------------------------- 9
Verdict cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "pgl_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ifstream base(std::string(PGL_CONFIG_DIR) + "/determinism.conf");
  std::stringstream body;
  body << base.rdbuf();
  std::string csv[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = dir / ("run" + std::to_string(k));
    const fs::path conf = dir / ("run" + std::to_string(k) + ".conf");
    std::ofstream(conf) << body.str() << "\noutput_dir = " << out.string() << "\n";
    const std::string cmd = std::string(PGL_CLI_PATH) + " train --deterministic --config " + conf.string() + " > /dev/null";
    const int raw = std::system(cmd.c_str());
    if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) return {false, "train exited abnormally"};
    std::ifstream in(out / "metrics.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    csv[k] = ss.str();
  }
  const auto rows = std::count(csv[0].begin(), csv[0].end(), '\n');
  return {!csv[0].empty() && csv[0] == csv[1] && rows > 1,
          std::string(csv[0] == csv[1] ? "identical" : "DIFFERENT") + " metrics.csv, " + std::to_string(rows) + " lines, " +
              std::to_string(csv[0].size()) + " bytes"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"oracle identities", oracle_identities},
      {"dominating condition 2", dominating_condition},
      {"clip/perceptron equivalence", clip_equivalence},
      {"gradient integrity", gradient_integrity},
      {"v-trace correctness", vtrace_correctness},
      {"pendulum learning", pendulum_learning},
      {"quadrotor hover", quad_hover},
      {"hover and dynamics unit suite", dynamics_suite},
      {"cli determinism", cli_determinism},
      {"tracking reward geometry", track_geometry},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << "criterion " << id << " (" << criteria[k].first << "): " << (v.pass ? "PASS" : "FAIL") << " -- "
              << v.detail << " [" << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
