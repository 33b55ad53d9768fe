#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shadow/motion.hpp"
#include "shadow/nn.hpp"
#include "shadow/rl.hpp"
#include "shadow/sim2d.hpp"

namespace shadow {

/// A motion file, or a generator spec when `generate` is set.
struct MotionSource {
  std::string path;
  std::optional<MotionKind> generate;
  MotionGenParams params;
};

struct TrainSchedule {
  std::size_t iterations = 1500;
  std::size_t checkpoint_every = 100;  ///< 0 disables periodic checkpoints
  /// Finished episodes the success_rate and mean_ep_len columns average over;
  /// 0 means the env count.
  std::size_t success_window = 0;
};

struct RunConfig {
  std::string chain;
  std::vector<MotionSource> motions;
  EnvConfig env;
  nn::NetConfig network;
  PPOConfig ppo;
  TrainSchedule train;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";

  /// `check_files` also requires the chain and motion files to exist.
  void validate(bool check_files = true) const;
};

/// Parses a config document. Relative paths are resolved against `base_dir`.
/// Unknown keys and out-of-range values throw SchemaError naming the field.
RunConfig parse_run_config(const nlohmann::json& doc, const std::string& base_dir, bool check_files = true);
RunConfig load_run_config(const std::string& path);
/// Every field, with paths as stored (already resolved).
nlohmann::json run_config_to_json(const RunConfig& cfg);

KinematicChain load_config_chain(const RunConfig& cfg);
std::vector<std::shared_ptr<const MotionTrajectory>> load_config_motions(const RunConfig& cfg,
                                                                        const KinematicChain& chain);

}  // namespace shadow
