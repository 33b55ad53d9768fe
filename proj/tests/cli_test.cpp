#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using shadow::test::data_path;

namespace {

const fs::path& work_dir() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / ("shadow_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + SHADOW_CLI + " " + args + " > " + (work_dir() / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string last_log() { return slurp(work_dir() / "last.log"); }

// Small-network copy of the smoke config with absolute paths.
fs::path tiny_config() {
  const fs::path out = work_dir() / "tiny.json";
  if (fs::exists(out)) return out;
  json cfg = json::parse(slurp(fs::path(SHADOW_CONFIG_DIR) / "smoke.json"));
  cfg["chain"] = data_path("chains/planar5.json");
  cfg["motions"] = json::array({{{"path", data_path("motions/getup-2d.json")}}});
  cfg["network"]["encoder"] = {{"d_model", 16}, {"feedforward", 16}, {"output", 16}, {"num_heads", 1},
                               {"num_layers", 1}};
  cfg["network"]["mlp"] = {32, 32};
  cfg["ppo"]["epochs"] = 1;
  cfg["train"]["iterations"] = 2;
  std::ofstream(out) << cfg.dump(2);
  return out;
}

std::string train_to(const std::string& name, const std::string& env = "") {
  const fs::path dir = work_dir() / name;
  EXPECT_EQ(run("train --config " + tiny_config().string() + " --seed 3 --out " + dir.string(), env), 0)
      << last_log();
  return slurp(dir / "metrics.csv");
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("train"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, GenMotionMatchesBundledFile) {
  const fs::path out = work_dir() / "motions" / "getup.json";
  EXPECT_EQ(run("gen-motion --kind getup-2d --chain " + data_path("chains/planar5.json") + " --out " + out.string()),
            0)
      << last_log();
  EXPECT_EQ(json::parse(slurp(out)), json::parse(slurp(data_path("motions/getup-2d.json"))));
  EXPECT_EQ(run("gen-motion --kind cartwheel --chain " + data_path("chains/planar5.json") + " --out " + out.string()),
            2);
}

TEST(Cli, GradcheckPassesAndCatchesBrokenBackward) {
  EXPECT_EQ(run("gradcheck"), 0) << last_log();
  EXPECT_NE(last_log().find("PASS"), std::string::npos);
  EXPECT_EQ(run("gradcheck --inject-broken"), 1);
  EXPECT_NE(last_log().find("FAIL"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("train --config /nonexistent.json"), 2);
  json cfg = json::parse(slurp(tiny_config()));
  cfg["ppo"]["bogus"] = 1;
  const fs::path bad = work_dir() / "bad.json";
  std::ofstream(bad) << cfg.dump();
  EXPECT_EQ(run("train --config " + bad.string()), 2);
  EXPECT_NE(last_log().find("$.ppo.bogus"), std::string::npos);
  EXPECT_EQ(run("train --config " + tiny_config().string() + " --mode dual"), 2);
}

TEST(Cli, TrainIsDeterministicAcrossThreadCounts) {
  const std::string a = train_to("run_a", "SHADOW_THREADS=1");
  const std::string b = train_to("run_b", "SHADOW_THREADS=2");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  std::istringstream in(a);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 4);
}

TEST(Cli, EvalReplayPlotPipeline) {
  train_to("run_eval");
  const fs::path ckpt = work_dir() / "run_eval" / "checkpoint";
  const fs::path eval = work_dir() / "eval";
  ASSERT_EQ(run("eval --checkpoint " + ckpt.string() + " --motion " + data_path("motions/getup-2d.json") +
                " --episodes 4 --out " + eval.string()),
            0)
      << last_log();
  const json report = json::parse(slurp(eval / "report.json"));
  EXPECT_GE(report["success_rate"].get<double>(), 0.0);
  EXPECT_LE(report["success_rate"].get<double>(), 1.0);
  EXPECT_EQ(report["episodes"].size(), 4u);
  EXPECT_TRUE(fs::exists(eval / "traces.csv"));

  const fs::path rep = work_dir() / "replay.jsonl";
  ASSERT_EQ(run("replay --checkpoint " + ckpt.string() + " --motion " + data_path("motions/getup-2d.json") +
                " --out " + rep.string()),
            0)
      << last_log();
  std::istringstream lines(slurp(rep));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    EXPECT_NO_THROW(json::parse(line));
    ++n;
  }
  EXPECT_GT(n, 0);

  const fs::path plots = work_dir() / "plots";
  ASSERT_EQ(run("plot --metrics " + (work_dir() / "run_eval" / "metrics.csv").string() + " --trace " +
                (eval / "traces.csv").string() + " --out " + plots.string()),
            0)
      << last_log();
  for (const char* f : {"success_rate.svg", "joint_acc.svg", "joint_acc_trace.svg"}) {
    EXPECT_TRUE(fs::exists(plots / f)) << f;
  }
}

TEST(Cli, EvalErrorsMapToExitCodes) {
  train_to("run_err");
  const fs::path ckpt = work_dir() / "run_err" / "checkpoint";
  EXPECT_EQ(run("eval --checkpoint " + ckpt.string() + " --motion /nonexistent.json"), 2);
  EXPECT_EQ(run("eval --checkpoint /nonexistent --motion " + data_path("motions/getup-2d.json")), 2);

  const fs::path other = work_dir() / "planar2_crouch.json";
  ASSERT_EQ(run("gen-motion --kind crouch --chain " + data_path("chains/planar2.json") + " --out " + other.string()),
            0);
  EXPECT_EQ(run("eval --checkpoint " + ckpt.string() + " --motion " + other.string() + " --episodes 1"), 3);

  const fs::path malformed = work_dir() / "bad_metrics.csv";
  std::ofstream(malformed) << "# schema=1\nnot,a,header\n";
  EXPECT_EQ(run("plot --metrics " + malformed.string() + " --out " + (work_dir() / "p2").string()), 2);
  EXPECT_NE(last_log().find(":2"), std::string::npos);
}
