#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "shadow/checkpoint.hpp"
#include "shadow/config.hpp"
#include "shadow/nn.hpp"
#include "shadow/rl.hpp"
#include "shadow/sim2d.hpp"

namespace shadow {

struct IterationMetrics {
  std::size_t iter = 0;
  std::size_t env_steps = 0;
  double success_rate = 0.0;
  double mean_ep_len = 0.0;
  double mean_r_task = 0.0;
  double mean_r_reg = 0.0;
  double mean_r_safety = 0.0;
  double loss_surrogate = 0.0;
  double loss_v1 = 0.0;
  double loss_v2 = 0.0;
  double loss_v3 = 0.0;
  double approx_kl = 0.0;
  double lr = 0.0;
  double max_joint_acc = 0.0;
};

inline constexpr const char* kMetricsSchemaLine = "# schema=1";
/// Column names, comma separated, in row order.
std::string metrics_columns();
/// Schema comment line and column line, each newline-terminated.
std::string metrics_header();
std::string format_metrics_row(const IterationMetrics& m);
/// Throws SchemaError("<source>:<line>", ...) on a malformed file.
std::vector<IterationMetrics> read_metrics_csv(std::istream& in, const std::string& source);
std::vector<IterationMetrics> read_metrics_file(const std::string& path);

nlohmann::json net_config_to_json(const nn::NetConfig& cfg);
nn::NetConfig net_config_from_json(const nlohmann::json& j);

/// Collect / update loop for one run.
class Trainer {
 public:
  Trainer(const RunConfig& cfg, CriticMode mode, std::uint64_t seed);

  /// One rollout followed by one PPO update.
  IterationMetrics iterate();

  std::size_t iteration() const { return iter_; }
  const RunConfig& config() const { return cfg_; }
  CriticMode mode() const { return mode_; }
  const nn::NetDims& dims() const { return dims_; }
  nn::PolicyNet& policy() { return policy_; }
  std::vector<nn::CriticNet>& critics() { return critics_; }
  PPO& ppo() { return *ppo_; }
  VecEnv& envs() { return *venv_; }
  const RolloutBuffer& buffer() const { return buffer_; }
  std::mt19937_64& rng() { return rng_; }

  /// Fills the rollout buffer; returns per-step reward means and the joint
  /// acceleration statistic through `m`.
  void collect(IterationMetrics& m);

  Checkpoint checkpoint() const;

 private:
  RunConfig cfg_;
  CriticMode mode_;
  std::shared_ptr<const KinematicChain> chain_;
  std::unique_ptr<VecEnv> venv_;
  nn::NetDims dims_;
  std::mt19937_64 rng_;
  nn::PolicyNet policy_;
  std::vector<nn::CriticNet> critics_;
  std::unique_ptr<PPO> ppo_;
  RolloutBuffer buffer_;
  std::deque<EpisodeStats> recent_;
  std::size_t iter_ = 0;
  std::size_t env_steps_ = 0;
};

struct TrainOutputs {
  std::vector<IterationMetrics> rows;
  std::string metrics_path;
  std::string final_checkpoint;
};

/// Runs cfg.train.iterations iterations, writing metrics.csv, config.json and
/// checkpoints under out_dir.
TrainOutputs run_training(const RunConfig& cfg, CriticMode mode, std::uint64_t seed, const std::string& out_dir,
                          const std::function<void(const IterationMetrics&)>& progress = {});

/// A policy rebuilt from a checkpoint, with the environment it was trained in.
struct LoadedPolicy {
  std::shared_ptr<const KinematicChain> chain;
  EnvConfig env;
  nn::NetDims dims;
  nn::PolicyNet policy;
  CriticMode mode = CriticMode::Multi;
};

LoadedPolicy load_policy(const Checkpoint& ckpt);

struct EvalEpisode {
  std::size_t index = 0;
  bool success = false;
  int length = 0;
  double return_task = 0.0;
  double return_reg = 0.0;
  double return_safety = 0.0;
  std::string cause;
  std::vector<int> keyframe_steps;  ///< steps on which a keyframe was consumed
};

struct TraceRow {
  std::size_t episode = 0;
  int step = 0;
  double time = 0.0;
  double max_joint_acc = 0.0;
  int keyframe = -1;  ///< keyframe consumed on this step, or -1
};

struct EvalReport {
  double success_rate = 0.0;
  double mean_ep_len = 0.0;
  std::vector<EvalEpisode> episodes;
  std::vector<TraceRow> trace;
};

/// Deterministic mean-action rollouts, one episode per environment seed
/// stream_seed(seed, episode). Results do not depend on `batch`.
EvalReport evaluate(const nn::PolicyNet& policy, std::shared_ptr<const KinematicChain> chain,
                    std::shared_ptr<const MotionTrajectory> motion, const EnvConfig& env, std::size_t episodes,
                    std::uint64_t seed, std::size_t batch = 256);

nlohmann::json eval_report_to_json(const EvalReport& r);
std::string eval_trace_csv(const EvalReport& r);

/// Mean per-step max joint acceleration within +-window steps of a keyframe
/// consumption, divided by the mean over the remaining steps.
double keyframe_window_ratio(const EvalReport& r, int window = 3);

/// Mean-action rollout of episode 0 of evaluate(..., seed), one JSON object
/// per step holding the state, the command sequence and the rewards.
std::vector<nlohmann::json> replay(const nn::PolicyNet& policy, std::shared_ptr<const KinematicChain> chain,
                                   std::shared_ptr<const MotionTrajectory> motion, const EnvConfig& env,
                                   std::uint64_t seed);

}  // namespace shadow
