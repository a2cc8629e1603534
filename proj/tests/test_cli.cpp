#include "pgl/runtime/metrics.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pgl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string(PGL_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + (dir / "stderr.txt").string();
  const int raw = std::system(cmd.c_str());
  Outcome o;
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  o.out = ss.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "run.conf";
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(Cli, ConfigErrorExitsWithTwo) {
  const fs::path dir = scratch("config_error");
  const fs::path conf = write_config(dir, "env = pendulum\nlearning_rat = 1e-4\n");
  EXPECT_EQ(run("train --config " + conf.string(), dir).status, 2);
  EXPECT_NE(slurp(dir / "stderr.txt").find("learning_rat"), std::string::npos);
  EXPECT_EQ(run("train --config " + (dir / "missing.conf").string(), dir).status, 2);
}

TEST(Cli, VerifyOraclePassesAndCorruptFails) {
  const fs::path dir = scratch("verify");
  const Outcome ok = run("verify-oracle --trials 10 --seed 3", dir);
  EXPECT_EQ(ok.status, 0);
  EXPECT_EQ(ok.out.substr(0, ok.out.find('\n')), "check,trial,states,actions,gamma,value,threshold,pass");
  EXPECT_EQ(ok.out.find(",0\n"), std::string::npos);
  const Outcome bad = run("verify-oracle --trials 3 --corrupt", dir);
  EXPECT_NE(bad.status, 0);
  EXPECT_NE(bad.out.find(",0\n"), std::string::npos);
  EXPECT_EQ(run("verify-oracle --trials 0", dir).status, 0);
}

TEST(Cli, TrainExportEvalRoundTrip) {
  const fs::path dir = scratch("roundtrip");
  const fs::path conf = write_config(dir,
                                     "env = quad-hover\n"
                                     "hidden_sizes = 8, 8\n"
                                     "max_trajectories = 12\n"
                                     "warmup = 10\n"
                                     "updates_per_trajectory = 2\n"
                                     "output_dir = " + (dir / "out").string() + "\n");
  ASSERT_EQ(run("train --deterministic --config " + conf.string(), dir).status, 0);
  const std::string metrics = slurp(dir / "out" / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), pgl::runtime::kMetricsHeader);

  const fs::path bin = dir / "policy_export.bin";
  ASSERT_EQ(run("export-weights --in " + (dir / "out" / "checkpoint.json").string() + " --out " + bin.string(), dir).status, 0);
  EXPECT_EQ(slurp(bin), slurp(dir / "out" / "policy.bin"));

  const Outcome eval = run("eval --weights " + bin.string() + " --env quad-hover --episodes 3 --seed 1 --dump " +
                               (dir / "ep").string(),
                           dir);
  ASSERT_EQ(eval.status, 0);
  EXPECT_EQ(std::count(eval.out.begin(), eval.out.end(), '\n'), 4);
  EXPECT_TRUE(fs::exists(dir / "ep_2.csv"));

  EXPECT_NE(run("eval --weights " + bin.string() + " --env pendulum", dir).status, 0);
  EXPECT_NE(run("export-weights --in " + (dir / "nope.bin").string() + " --out " + bin.string(), dir).status, 0);
}

TEST(Cli, DeterministicTrainIsBitIdentical) {
  const fs::path dir = scratch("determinism");
  std::string metrics[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path conf = write_config(dir,
                                       "env = pendulum\n"
                                       "hidden_sizes = 8\n"
                                       "max_trajectories = 15\n"
                                       "updates_per_trajectory = 2\n"
                                       "metrics_interval = 400\n"
                                       "output_dir = " + (dir / ("run" + std::to_string(k))).string() + "\n");
    ASSERT_EQ(run("train --deterministic --seed 7 --config " + conf.string(), dir).status, 0);
    metrics[k] = slurp(dir / ("run" + std::to_string(k)) / "metrics.csv");
  }
  EXPECT_EQ(metrics[0], metrics[1]);
  EXPECT_GT(std::count(metrics[0].begin(), metrics[0].end(), '\n'), 5);
}

TEST(Cli, UnknownSubcommandRejected) {
  const fs::path dir = scratch("usage");
  EXPECT_NE(run("frobnicate", dir).status, 0);
  EXPECT_NE(run("", dir).status, 0);
}
