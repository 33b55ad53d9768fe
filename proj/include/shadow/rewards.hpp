#pragma once

#include <span>
#include <string_view>

#include "shadow/command.hpp"
#include "shadow/geom.hpp"
#include "shadow/kinematics.hpp"

namespace shadow {

/// Gaussian kernel exp(-a / b^2). Negative `a` is clamped to zero so the
/// result stays in (0, 1].
double psi(double a, double b);

/// Kernel widths per reward term, grouped task / regularization / safety.
struct RewardConfig {
  double base_pos = 0.4;
  double base_orient = 0.8;
  double joint = 0.3;

  double action_rate = 1.0;
  double joint_acc = 500.0;
  double joint_vel = 15.0;

  double pos_limit = 0.1;
  double torque_limit = 0.1;
  double torque_margin = 0.9;  ///< fraction of the torque limit that is free

  /// Throws std::invalid_argument unless every width is positive.
  void validate() const;
};

enum class QuatTerminationMode {
  Angle,   ///< geodesic angle above the threshold terminates
  ImNorm,  ///< literal form: |Im(conj(q) * q_ref)| < threshold terminates
};

enum class JointTerminationMode {
  Any,  ///< any joint beyond the threshold terminates
  All,  ///< literal form: every joint beyond the threshold terminates
};

struct TerminationConfig {
  double pos_threshold = 0.5;
  double orient_threshold = 1.0;
  double joint_threshold = 1.0;
  QuatTerminationMode quat_mode = QuatTerminationMode::Angle;
  JointTerminationMode joint_mode = JointTerminationMode::Any;

  void validate() const;
};

enum class TerminationCause { None, Position, Orientation, Joint };
std::string_view termination_cause_name(TerminationCause c);

struct TerminationResult {
  bool terminate = false;
  TerminationCause cause = TerminationCause::None;
};

/// Product of the three tracking kernels (world frame base position, geodesic
/// base orientation, joint vector 2-norm) against one keyframe.
double task_reward(const RobotState& robot, std::span<const double> joint_target, const Pose& world_ref,
                   const RewardConfig& cfg = {});

/// Product of the action-rate, joint-acceleration and joint-velocity kernels.
/// Joint acceleration is (theta_dot - prev_theta_dot) / dt.
double regularization_reward(std::span<const double> theta_dot, std::span<const double> prev_theta_dot,
                             std::span<const double> action, std::span<const double> prev_action, double dt,
                             const RewardConfig& cfg = {});

/// Product of the joint-position-limit and torque-limit kernels; each kernel
/// sees the worst joint.
double safety_reward(std::span<const double> theta, std::span<const double> torque, const KinematicChain& chain,
                     const RewardConfig& cfg = {});

TerminationResult check_termination(const RobotState& robot, std::span<const double> joint_target,
                                    const Pose& world_ref, const TerminationConfig& cfg = {});

}  // namespace shadow
