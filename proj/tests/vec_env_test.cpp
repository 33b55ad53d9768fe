#include <gtest/gtest.h>

#include <random>

#include "shadow/sim2d.hpp"
#include "test_util.hpp"

using namespace shadow;
using shadow::test::data_path;

namespace {

std::shared_ptr<const KinematicChain> planar5() {
  static auto c = std::make_shared<const KinematicChain>(load_chain_file(data_path("chains/planar5.json")));
  return c;
}

std::shared_ptr<const MotionTrajectory> getup() {
  static auto m = std::make_shared<const MotionTrajectory>(load_motion_file(data_path("motions/getup-2d.json")));
  return m;
}

struct Trace {
  std::vector<double> values;
  std::vector<int> finished;
  bool operator==(const Trace&) const = default;
};

Trace run(int threads, std::size_t n, int steps) {
  VecEnv venv(planar5(), {getup()}, EnvConfig{}, n, 42);
  venv.set_threads(threads);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t nj = planar5()->num_joints();
  Trace t;
  for (int s = 0; s < steps; ++s) {
    std::vector<double> a(n * nj);
    for (double& v : a) v = g(rng);
    const VecStepResult r = venv.step(a);
    for (const auto& x : r.results) t.values.insert(t.values.end(), {x.r_task, x.r_reg, x.r_safety});
    for (const auto& e : r.finished) t.finished.insert(t.finished.end(), {int(e.env), e.length, int(e.success)});
    const auto obs = venv.observations();
    t.values.insert(t.values.end(), obs.begin(), obs.end());
  }
  return t;
}

}  // namespace

TEST(VecEnv, SingleEnvMatchesPlainEnv) {
  VecEnv venv(planar5(), {getup()}, EnvConfig{}, 1, 7);
  Env env(planar5(), getup(), EnvConfig{}, stream_seed(7, 0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int s = 0; s < 300; ++s) {
    std::vector<double> a(env.num_joints());
    for (double& v : a) v = g(rng);
    const VecStepResult vr = venv.step(a);
    const StepResult r = env.step(a);
    EXPECT_EQ(vr.results[0].r_task, r.r_task);
    EXPECT_EQ(vr.results[0].r_reg, r.r_reg);
    EXPECT_EQ(vr.results[0].r_safety, r.r_safety);
    if (r.terminated || r.truncated) env.reset();
    EXPECT_EQ(venv.env(0).observe(), env.observe());
  }
}

TEST(VecEnv, ThreadCountIndependent) {
  const Trace one = run(1, 16, 200);
  EXPECT_EQ(run(2, 16, 200), one);
  EXPECT_EQ(run(8, 16, 200), one);
}

TEST(VecEnv, BatchMismatchThrows) {
  VecEnv venv(planar5(), {getup()}, EnvConfig{}, 3, 1);
  EXPECT_THROW(venv.step(std::vector<double>(4, 0.0)), DimensionError);
}

TEST(VecEnv, EpisodeStatsMatchManualReplay) {
  const std::size_t n = 4;
  VecEnv venv(planar5(), {getup()}, EnvConfig{}, n, 3);
  std::vector<Env> manual;
  for (std::size_t i = 0; i < n; ++i) manual.emplace_back(planar5(), getup(), EnvConfig{}, stream_seed(3, i));
  std::vector<EpisodeStats> running(n);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.5);
  const std::size_t nj = planar5()->num_joints();
  int episodes = 0;
  for (int s = 0; s < 400; ++s) {
    std::vector<double> a(n * nj);
    for (double& v : a) v = g(rng);
    const VecStepResult r = venv.step(a);
    std::vector<EpisodeStats> expected;
    for (std::size_t i = 0; i < n; ++i) {
      const StepResult x = manual[i].step(std::span<const double>(a).subspan(i * nj, nj));
      running[i].length += 1;
      running[i].return_task += x.r_task;
      if (x.terminated || x.truncated) {
        running[i].env = i;
        running[i].success = x.truncated && !x.terminated;
        expected.push_back(running[i]);
        running[i] = {};
        manual[i].reset();
      }
    }
    ASSERT_EQ(r.finished.size(), expected.size());
    ASSERT_EQ(r.terminal.size(), expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k) {
      EXPECT_EQ(r.finished[k].env, expected[k].env);
      EXPECT_EQ(r.finished[k].length, expected[k].length);
      EXPECT_EQ(r.finished[k].success, expected[k].success);
      EXPECT_DOUBLE_EQ(r.finished[k].return_task, expected[k].return_task);
      EXPECT_EQ(r.terminal[k].env, expected[k].env);
      ++episodes;
    }
  }
  EXPECT_GT(episodes, 10);
}

TEST(VecEnv, StreamSeedsDiffer) {
  EXPECT_NE(stream_seed(1, 0), stream_seed(1, 1));
  EXPECT_NE(stream_seed(1, 0), stream_seed(2, 0));
  EXPECT_EQ(stream_seed(9, 4), stream_seed(9, 4));
}

TEST(VecEnv, ThreadsFromEnvironment) {
  setenv("SHADOW_THREADS", "3", 1);
  EXPECT_EQ(threads_from_env(), 3);
  setenv("SHADOW_THREADS", "junk", 1);
  EXPECT_EQ(threads_from_env(), 0);
  unsetenv("SHADOW_THREADS");
  EXPECT_EQ(threads_from_env(), 0);
}
