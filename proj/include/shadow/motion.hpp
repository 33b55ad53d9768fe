#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shadow/geom.hpp"
#include "shadow/kinematics.hpp"

namespace shadow {

struct MotionFrame {
  Vec3 p;
  Quat q;
  std::vector<double> theta;
};

/// Time-indexed reference: base pose in world plus joint vector, sampled at fps.
struct MotionTrajectory {
  double fps = 50.0;
  std::vector<std::string> joint_names;
  std::vector<MotionFrame> frames;

  std::size_t joint_count() const { return frames.empty() ? joint_names.size() : frames.front().theta.size(); }
  /// Time of the last stored frame.
  double duration() const;
  /// Interpolated frame at t (clamped to [0, duration]): linear in p and theta,
  /// shortest-arc spherical in q.
  MotionFrame at(double t) const;
  /// Throws SchemaError if the invariants do not hold.
  void validate() const;
};

MotionTrajectory load_motion(std::string_view json_text);
MotionTrajectory load_motion_file(const std::string& path);
std::string save_motion(const MotionTrajectory& traj);

/// Keyframes sampled at t + k * t_int, k = 1..K.
///
/// Reach times are min(t + k t_int, duration). Only the prefix up to and
/// including the first frame that reaches the end of the trajectory is active;
/// the remaining slots repeat that last active frame so the sequence length
/// stays K.
struct KeyframeSample {
  std::vector<MotionFrame> frames;
  std::vector<double> reach_times;
  std::size_t active = 0;
};

KeyframeSample sample_keyframes(const MotionTrajectory& traj, double t, double t_int, std::size_t count);

/// Smallest h >= 0 such that raising every frame's base by h keeps every
/// collision point at or above the ground plane z = 0.
double ground_offset(const MotionTrajectory& traj, const KinematicChain& chain);

enum class MotionKind { GetUp2d, Crouch, StandReach };

MotionKind parse_motion_kind(std::string_view name);
std::string_view motion_kind_name(MotionKind kind);

struct MotionGenParams {
  double duration = 3.0;  ///< seconds; frame count is round(duration * fps)
  double fps = 50.0;
};

/// Piecewise-linear motion through a fixed set of key poses. Joint values are
/// keyed by link name (chest, thigh, shin, upper_arm, forearm); joints the chain
/// does not name that way stay at the chain default pose. The generated
/// trajectory is lifted by its ground offset so no frame penetrates the ground.
MotionTrajectory gen_motion(MotionKind kind, const KinematicChain& chain, const MotionGenParams& params = {});

}  // namespace shadow
