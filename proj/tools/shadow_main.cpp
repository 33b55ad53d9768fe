// shadow: motion generation, training, evaluation, replay, plotting and
// gradient checks for the planar shadowing stack.
//
// Exit codes: 0 ok, 2 configuration error, 3 runtime or dimension error.

#include <CLI11.hpp>

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shadow/checkpoint.hpp"
#include "shadow/config.hpp"
#include "shadow/error.hpp"
#include "shadow/gradcheck.hpp"
#include "shadow/plot.hpp"
#include "shadow/trainer.hpp"

namespace fs = std::filesystem;
using namespace shadow;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

int cmd_gen_motion(const std::string& kind, const std::string& chain_path, const std::string& out, double duration,
                   double fps) {
  const KinematicChain chain = load_chain_file(chain_path);
  MotionKind k;
  try {
    k = parse_motion_kind(kind);
  } catch (const std::exception& e) {
    throw SchemaError("--kind", e.what());
  }
  if (!(duration > 0.0) || !(fps > 0.0)) throw SchemaError("--duration/--fps", "must be positive");
  const MotionTrajectory m = gen_motion(k, chain, {duration, fps});
  write_text(out, save_motion(m));
  std::printf("wrote %s: %zu frames, %.3f s\n", out.c_str(), m.frames.size(), m.duration());
  return kOk;
}

int cmd_train(const std::string& config, const std::string& mode, std::uint64_t seed, bool seed_set,
              const std::string& out_override, std::size_t iterations) {
  RunConfig cfg = load_run_config(config);
  const CriticMode m = parse_critic_mode(mode);
  if (!seed_set) seed = cfg.seed;
  if (iterations > 0) cfg.train.iterations = iterations;
  const std::string out = out_override.empty() ? cfg.output_dir : out_override;
  const auto res = run_training(cfg, m, seed, out, [&](const IterationMetrics& r) {
    std::printf("iter %zu  steps %zu  success %.3f  ep_len %.1f  r=(%.3f %.3f %.3f)  kl %.4f  lr %.2e\n", r.iter,
                r.env_steps, r.success_rate, r.mean_ep_len, r.mean_r_task, r.mean_r_reg, r.mean_r_safety,
                r.approx_kl, r.lr);
    std::fflush(stdout);
  });
  std::printf("metrics: %s\ncheckpoint: %s\n", res.metrics_path.c_str(), res.final_checkpoint.c_str());
  return kOk;
}

int cmd_eval(const std::string& ckpt_dir, const std::string& motion_path, std::size_t episodes, std::uint64_t seed,
             const std::string& out) {
  if (episodes == 0) throw SchemaError("--episodes", "must be positive");
  const Checkpoint ck = load_checkpoint(ckpt_dir);
  LoadedPolicy lp = load_policy(ck);
  auto motion = std::make_shared<MotionTrajectory>(load_motion_file(motion_path));
  const EvalReport rep = evaluate(lp.policy, lp.chain, motion, lp.env, episodes, seed);
  write_text(fs::path(out) / "report.json", eval_report_to_json(rep).dump(2) + "\n");
  write_text(fs::path(out) / "traces.csv", eval_trace_csv(rep));
  std::printf("success_rate %.4f  mean_ep_len %.2f  keyframe_window_ratio %.4f\n", rep.success_rate,
              rep.mean_ep_len, keyframe_window_ratio(rep));
  return kOk;
}

int cmd_replay(const std::string& ckpt_dir, const std::string& motion_path, const std::string& out,
               std::uint64_t seed) {
  const Checkpoint ck = load_checkpoint(ckpt_dir);
  LoadedPolicy lp = load_policy(ck);
  auto motion = std::make_shared<MotionTrajectory>(load_motion_file(motion_path));
  const auto lines = replay(lp.policy, lp.chain, motion, lp.env, seed);
  std::string text;
  for (const auto& l : lines) text += l.dump() + "\n";
  write_text(out, text);
  std::printf("wrote %zu steps to %s\n", lines.size(), out.c_str());
  return kOk;
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path, "cannot open trace file");
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    TraceRow r;
    char comma;
    std::istringstream ss(line);
    if (!(ss >> r.episode >> comma >> r.step >> comma >> r.time >> comma >> r.max_joint_acc >> comma >> r.keyframe)) {
      throw SchemaError(path + ":" + std::to_string(lineno), "malformed trace row");
    }
    rows.push_back(r);
  }
  return rows;
}

int cmd_plot(const std::vector<std::string>& metrics, const std::string& trace, const std::string& out) {
  LineChart success{"Success rate during training", "iteration", "success rate", {}, {}};
  LineChart acc{"Joint acceleration during training", "iteration", "mean per-step max |joint acc| (rad/s^2)", {}, {}};
  for (const auto& path : metrics) {
    const auto rows = read_metrics_file(path);
    const std::string name = fs::path(path).parent_path().filename().string().empty()
                                 ? fs::path(path).stem().string()
                                 : fs::path(path).parent_path().filename().string();
    Series s{name, {}, {}};
    Series a{name, {}, {}};
    for (const auto& r : rows) {
      s.x.push_back(static_cast<double>(r.iter));
      s.y.push_back(r.success_rate);
      a.x.push_back(static_cast<double>(r.iter));
      a.y.push_back(r.max_joint_acc);
    }
    success.series.push_back(std::move(s));
    acc.series.push_back(std::move(a));
  }
  write_text(fs::path(out) / "success_rate.svg", render_svg(success));
  write_text(fs::path(out) / "joint_acc.svg", render_svg(acc));
  if (!trace.empty()) {
    const auto rows = read_trace_csv(trace);
    LineChart tc{"Max joint acceleration, episode 0 (red: keyframe reached)", "time (s)",
                 "max |joint acc| (rad/s^2)", {}, {}};
    Series s{"episode 0", {}, {}};
    for (const auto& r : rows) {
      if (r.episode != 0) continue;
      s.x.push_back(r.time);
      s.y.push_back(r.max_joint_acc);
      if (r.keyframe >= 0) tc.markers.push_back(r.time);
    }
    tc.series.push_back(std::move(s));
    write_text(fs::path(out) / "joint_acc_trace.svg", render_svg(tc));
  }
  std::printf("wrote plots to %s\n", out.c_str());
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed, bool inject_broken) {
  auto cases = nn::default_grad_cases();
  if (inject_broken) cases.push_back(nn::broken_grad_case());
  const auto rep = nn::run_gradcheck(cases, seed);
  for (const auto& r : rep.results) {
    std::printf("%-32s max_rel_err %.3e  tol %.0e  %s\n", r.name.c_str(), r.max_rel_error, r.tolerance,
                r.pass ? "PASS" : "FAIL");
  }
  std::printf("%s in %.2f s\n", rep.passed() ? "all passed" : "FAILED", rep.seconds);
  return rep.passed() ? kOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (const int n = threads_from_env(); n > 0) omp_set_num_threads(n);

  CLI::App app{"Planar humanoid shadowing: motions, training, evaluation and plots"};
  app.require_subcommand(1);

  std::string kind, chain, out = ".";
  double duration = 3.0, fps = 50.0;
  auto* gen = app.add_subcommand("gen-motion", "Generate a reference motion file");
  gen->add_option("--kind", kind, "getup-2d, crouch or stand-reach")->required();
  gen->add_option("--chain", chain, "Chain JSON file")->required();
  gen->add_option("--out", out, "Output motion JSON")->required();
  gen->add_option("--duration", duration, "Seconds");
  gen->add_option("--fps", fps, "Frames per second");

  std::string config, mode = "multi", train_out;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  auto* train = app.add_subcommand("train", "Train a policy");
  train->add_option("--config", config, "Run config JSON")->required();
  train->add_option("--mode", mode, "multi or single")->check(CLI::IsMember({"multi", "single"}));
  auto* seed_opt = train->add_option("--seed", seed, "Seed (default: config seed)");
  train->add_option("--out", train_out, "Output directory (default: config output_dir)");
  train->add_option("--iterations", iterations, "Override the iteration count");

  std::string ckpt, motion, eval_out = "eval";
  std::size_t episodes = 100;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  eval->add_option("--motion", motion, "Motion JSON")->required();
  eval->add_option("--episodes", episodes, "Episode count");
  eval->add_option("--seed", eval_seed, "Seed");
  eval->add_option("--out", eval_out, "Output directory");

  std::string replay_out;
  std::uint64_t replay_seed = 0;
  auto* rep = app.add_subcommand("replay", "Dump a deterministic rollout");
  rep->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  rep->add_option("--motion", motion, "Motion JSON")->required();
  rep->add_option("--out", replay_out, "Output JSON-lines file")->required();
  rep->add_option("--seed", replay_seed, "Seed");

  std::vector<std::string> metrics;
  std::string trace, plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG charts from metrics");
  plot->add_option("--metrics", metrics, "metrics.csv files (repeatable)")->required();
  plot->add_option("--trace", trace, "traces.csv from eval");
  plot->add_option("--out", plot_out, "Output directory")->required();

  bool inject = false;
  std::uint64_t gc_seed = 1;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("--seed", gc_seed, "Seed");
  gc->add_flag("--inject-broken", inject, "Add an op with a wrong backward");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) return cmd_gen_motion(kind, chain, out, duration, fps);
    if (*train) return cmd_train(config, mode, seed, seed_opt->count() > 0, train_out, iterations);
    if (*eval) return cmd_eval(ckpt, motion, episodes, eval_seed, eval_out);
    if (*rep) return cmd_replay(ckpt, motion, replay_out, replay_seed);
    if (*plot) return cmd_plot(metrics, trace, plot_out);
    if (*gc) return cmd_gradcheck(gc_seed, inject);
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kOk;
}
