#pragma once

#include <span>
#include <vector>

#include "shadow/geom.hpp"
#include "shadow/kinematics.hpp"
#include "shadow/motion.hpp"

namespace shadow {

/// What the command interface needs to know about the robot.
struct RobotState {
  Pose base;
  std::vector<double> theta;
};

/// One motion target token:
/// [base pos (3), base axis-angle (3), joint targets (n_j), link targets (3 n_t),
///  joint errors (n_j), link errors (3 n_t), t_passed, t_left].
struct CommandFrame {
  Vec3 base_pos;       ///< target base position in the current base frame
  AxisAngle base_rot;  ///< target base orientation in the current base frame
  std::vector<double> joint_target;
  std::vector<double> link_target;  ///< flattened target link positions, base frame
  std::vector<double> joint_err;    ///< joint_target - theta
  std::vector<double> link_err;     ///< link_target - current link positions
  double t_passed = 0.0;
  double t_left = 0.0;
  bool is_state_target = false;

  /// Token width for n_j joints and n_t target links.
  static std::size_t width(std::size_t n_joints, std::size_t n_targets) { return 6 + 2 * n_joints + 6 * n_targets + 2; }
  void append_features(std::vector<double>& out) const;
};

/// K keyframes followed by exactly one state-target token.
struct CommandSequence {
  std::vector<CommandFrame> frames;
  std::vector<double> reach_times;  ///< absolute seconds, one per keyframe
  std::vector<Pose> world_refs;     ///< world-frame reference base pose per keyframe
  std::size_t active = 0;           ///< keyframes before padding starts
  double t_refresh = 0.0;

  std::size_t num_keyframes() const { return reach_times.size(); }
  std::size_t state_target_index() const { return frames.size() - 1; }
  const CommandFrame& keyframe(std::size_t k) const { return frames.at(k); }

  /// Row-major [K + 1, width] token matrix.
  std::vector<double> tokens() const;
  /// t_left of each keyframe (state target excluded).
  std::vector<double> t_lefts() const;
};

/// Samples K keyframes after `now` and re-expresses them against the current
/// robot state; the state-target token mirrors the robot itself.
CommandSequence build_command_sequence(const MotionTrajectory& traj, const KinematicChain& chain,
                                       const RobotState& robot, double now, double t_int, std::size_t count);

/// Updates errors and clocks in place for the current state and time. Base
/// targets stay as they were at the last rebuild.
void refresh_errors(CommandSequence& seq, const RobotState& robot, const KinematicChain& chain, double now);

}  // namespace shadow
