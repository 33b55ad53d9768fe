#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "shadow/command.hpp"
#include "shadow/kinematics.hpp"
#include "shadow/motion.hpp"
#include "shadow/rewards.hpp"

namespace shadow {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Per-episode dynamics perturbation.
struct DomainRand {
  double mass_scale = 1.0;
  double com_offset = 0.0;  ///< meters, along the base x axis
  double kp_scale = 1.0;
  double kd_scale = 1.0;
  double motor_delay = 0.0;  ///< seconds
};

struct DomainRandRanges {
  Interval mass_scale{0.8, 1.2};
  Interval com_offset{-0.02, 0.02};
  Interval kp_scale{0.9, 1.1};
  Interval kd_scale{0.9, 1.1};
  Interval motor_delay{0.0, 0.03};

  DomainRand sample(std::mt19937_64& rng) const;
  bool contains(const DomainRand& s) const;
};

struct ContactParams {
  double k_n = 5000.0;  ///< normal stiffness, N/m
  double c_n = 50.0;    ///< normal damping, N s/m
  double k_t = 500.0;   ///< tangential viscous gain, N s/m
  double mu = 0.8;      ///< friction coefficient
};

struct EnvConfig {
  double dt_policy = 0.02;
  int substeps = 4;
  double gravity = 9.81;
  /// Per-joint gains; empty means the chain defaults. Both are multiplied by gain_scale.
  std::vector<double> kp;
  std::vector<double> kd;
  double gain_scale = 1.0;
  ContactParams contact;
  double base_inertia = 0.8;  ///< kg m^2 about the pitch axis
  double spawn_height = 0.04;
  Interval init_ratio{0.0, 0.6};
  Interval t_int{0.2, 0.4};
  std::size_t keyframes = 5;
  int history = 5;
  double action_scale = 0.5;
  bool randomize = true;
  DomainRandRanges rand;
  RewardConfig reward;
  TerminationConfig termination;
  /// |velocity| beyond this is treated as divergence.
  double divergence_limit = 1e3;

  double substep_dt() const { return dt_policy / substeps; }
  void validate() const;
};

/// Dynamics after domain randomization.
struct DynamicParams {
  std::vector<double> link_mass;
  double total_mass = 0.0;
  double com_offset = 0.0;
  std::vector<double> kp;
  std::vector<double> kd;
  std::vector<double> joint_inertia;
  std::vector<double> joint_friction;
  int delay_substeps = 0;
};

DynamicParams apply_domain_rand(const KinematicChain& chain, const EnvConfig& cfg, const DomainRand& sample);

/// clamp(kp (target - theta) - kd theta_dot, +-tau_max), elementwise.
std::vector<double> pd_torque(std::span<const double> kp, std::span<const double> kd, std::span<const double> target,
                              std::span<const double> theta, std::span<const double> theta_dot,
                              std::span<const double> tau_max);

/// Penalty ground contact on the plane z = 0 (world frame force on the point).
Vec3 contact_force(const Vec3& pos, const Vec3& vel, const ContactParams& cfg);

/// Planar robot state. The base moves in x-z and pitches about y; y, roll and
/// yaw are identically zero.
struct SimState {
  double x = 0.0;
  double z = 0.0;
  double pitch = 0.0;
  double vx = 0.0;  ///< base (pelvis) linear velocity
  double vz = 0.0;
  double pitch_rate = 0.0;
  std::vector<double> theta;
  std::vector<double> theta_dot;
  std::vector<double> prev_theta_dot;
  std::vector<double> prev_action;
  std::vector<double> prev_prev_action;
  double time = 0.0;       ///< motion time, seconds
  std::int64_t steps = 0;  ///< policy steps since reset
  int consumed = 0;        ///< keyframes consumed since reset

  Pose base() const;
  Vec3 lin_vel() const { return {vx, 0.0, vz}; }
  Vec3 ang_vel() const { return {0.0, pitch_rate, 0.0}; }
  RobotState robot() const { return {base(), theta}; }
};

struct StepInfo {
  std::vector<double> torque;     ///< max |tau| per joint over the substeps, signed
  Vec3 contact_force_sum;         ///< mean over substeps
  int consumed_keyframe = -1;     ///< index since reset of the keyframe consumed this step
  std::vector<double> joint_acc;  ///< (theta_dot - prev_theta_dot) / dt
  double max_joint_acc = 0.0;
  TerminationCause cause = TerminationCause::None;
};

struct StepResult {
  double r_task = 0.0;
  double r_reg = 0.0;
  double r_safety = 0.0;
  bool terminated = false;
  bool truncated = false;
  bool diverged = false;
  StepInfo info;
};

struct ResetOptions {
  std::optional<double> init_ratio;  ///< forces the start frame ratio
  std::optional<DomainRand> rand;    ///< forces the dynamics sample
  std::optional<double> t_int;
};

/// One planar environment: robot, reference motion and command stream.
class Env {
 public:
  Env(std::shared_ptr<const KinematicChain> chain, std::shared_ptr<const MotionTrajectory> traj, EnvConfig cfg,
      std::uint64_t seed);

  void reset(const ResetOptions& opts = {});
  StepResult step(std::span<const double> action);

  std::vector<double> observe() const;
  std::vector<double> command_tokens() const { return seq_.tokens(); }

  std::size_t obs_width() const;
  std::size_t token_width() const;
  std::size_t num_tokens() const { return cfg_.keyframes + 1; }
  std::size_t num_joints() const { return chain_->num_joints(); }

  const SimState& state() const { return state_; }
  SimState& mutable_state() { return state_; }
  const CommandSequence& sequence() const { return seq_; }
  const EnvConfig& config() const { return cfg_; }
  const DynamicParams& dynamics() const { return dyn_; }
  const DomainRand& domain_rand() const { return rand_; }
  const KinematicChain& chain() const { return *chain_; }
  const MotionTrajectory& motion() const { return traj_; }
  double t_int() const { return t_int_; }

  /// Advances physics by one substep toward `target` with no reward logic.
  /// Returns the torques applied.
  std::vector<double> physics_substep(std::span<const double> target, Vec3* contact_sum = nullptr);

  double center_of_mass_height() const;
  /// Translational momentum M v_com and the mechanical energy of the base:
  /// kinetic + gravitational + stored contact spring energy.
  Vec3 base_momentum() const;
  double base_energy() const;
  /// Deepest ground penetration over all collision points (0 if none).
  double max_penetration() const;

 private:
  void push_history();
  std::vector<double> observation_frame() const;
  Vec3 com_world(const LinkPoseSet& poses) const;

  std::shared_ptr<const KinematicChain> chain_;
  MotionTrajectory traj_;  ///< lifted by its ground offset
  EnvConfig cfg_;
  std::mt19937_64 rng_;
  DomainRand rand_;
  DynamicParams dyn_;
  SimState state_;
  CommandSequence seq_;
  double t_int_ = 0.2;
  std::deque<std::vector<double>> history_;
  std::deque<std::vector<double>> delay_line_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> tau_max_;
};

/// Batch of independent environments stepped in parallel.
struct EpisodeStats {
  std::size_t env = 0;
  bool success = false;
  int length = 0;
  double return_task = 0.0;
  double return_reg = 0.0;
  double return_safety = 0.0;
};

/// What an environment looked like when its episode ended, before the reset.
struct TerminalView {
  std::size_t env = 0;
  std::vector<double> obs;
  std::vector<double> tokens;
  std::vector<double> t_lefts;
};

struct VecStepResult {
  std::vector<StepResult> results;
  std::vector<EpisodeStats> finished;
  std::vector<TerminalView> terminal;  ///< parallel to `finished`
};

class VecEnv {
 public:
  VecEnv(std::shared_ptr<const KinematicChain> chain, std::vector<std::shared_ptr<const MotionTrajectory>> motions,
         EnvConfig cfg, std::size_t count, std::uint64_t seed);

  std::size_t size() const { return envs_.size(); }
  Env& env(std::size_t i) { return envs_.at(i); }
  const Env& env(std::size_t i) const { return envs_.at(i); }

  void reset_all();
  /// actions is row-major [N, n_j]. Finished envs are reset before returning,
  /// so observations afterwards belong to the next episode.
  VecStepResult step(std::span<const double> actions);

  /// Row-major [N, obs_width] and [N, K + 1, token_width] batches.
  std::vector<double> observations() const;
  std::vector<double> tokens() const;
  std::vector<std::vector<double>> t_lefts() const;

  /// Worker threads used by step(); 0 means the SHADOW_THREADS / OpenMP default.
  void set_threads(int n) { threads_ = n; }

 private:
  std::vector<Env> envs_;
  std::vector<EpisodeStats> running_;
  int threads_ = 0;
};

/// Worker count from SHADOW_THREADS, or 0 when unset.
int threads_from_env();

/// Independent 64-bit seed for stream `index` of a run seeded with `seed`.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace shadow
