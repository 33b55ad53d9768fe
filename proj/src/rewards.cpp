#include "shadow/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shadow/error.hpp"

namespace shadow {

double psi(double a, double b) { return std::exp(-std::max(a, 0.0) / (b * b)); }

void RewardConfig::validate() const {
  for (double b : {base_pos, base_orient, joint, action_rate, joint_acc, joint_vel, pos_limit, torque_limit}) {
    if (!(b > 0.0)) throw std::invalid_argument("reward kernel widths must be positive");
  }
  if (!(torque_margin > 0.0)) throw std::invalid_argument("reward torque_margin must be positive");
}

void TerminationConfig::validate() const {
  if (!(pos_threshold > 0.0) || !(orient_threshold > 0.0) || !(joint_threshold > 0.0)) {
    throw std::invalid_argument("termination thresholds must be positive");
  }
}

std::string_view termination_cause_name(TerminationCause c) {
  switch (c) {
    case TerminationCause::None:
      return "none";
    case TerminationCause::Position:
      return "position";
    case TerminationCause::Orientation:
      return "orientation";
    case TerminationCause::Joint:
      return "joint";
  }
  return "none";
}

namespace {

double l2_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("reward: vector sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

double task_reward(const RobotState& robot, std::span<const double> joint_target, const Pose& world_ref,
                   const RewardConfig& cfg) {
  const double pos_err = (robot.base.p - world_ref.p).norm();
  const double rot_err = angle_between(robot.base.q, world_ref.q);
  const double joint_err = l2_diff(robot.theta, joint_target);
  return psi(pos_err, cfg.base_pos) * psi(rot_err, cfg.base_orient) * psi(joint_err, cfg.joint);
}

double regularization_reward(std::span<const double> theta_dot, std::span<const double> prev_theta_dot,
                             std::span<const double> action, std::span<const double> prev_action, double dt,
                             const RewardConfig& cfg) {
  if (!(dt > 0.0)) throw std::invalid_argument("regularization_reward: dt must be positive");
  const double rate = l2_diff(action, prev_action);
  const double acc = l2_diff(theta_dot, prev_theta_dot) / dt;
  double vel = 0.0;
  for (double v : theta_dot) vel += v * v;
  vel = std::sqrt(vel);
  return psi(rate, cfg.action_rate) * psi(acc, cfg.joint_acc) * psi(vel, cfg.joint_vel);
}

double safety_reward(std::span<const double> theta, std::span<const double> torque, const KinematicChain& chain,
                     const RewardConfig& cfg) {
  if (theta.size() != chain.num_joints() || torque.size() != chain.num_joints()) {
    throw DimensionError("safety_reward: expected " + std::to_string(chain.num_joints()) + " joints");
  }
  double limit_violation = 0.0;
  double torque_violation = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const Link& l = chain.link(chain.joint_links()[j]);
    limit_violation = std::max(limit_violation, std::max(theta[j] - l.upper, l.lower - theta[j]));
    torque_violation = std::max(torque_violation, std::abs(torque[j]) - cfg.torque_margin * l.torque_limit);
  }
  return psi(limit_violation, cfg.pos_limit) * psi(torque_violation, cfg.torque_limit);
}

TerminationResult check_termination(const RobotState& robot, std::span<const double> joint_target,
                                    const Pose& world_ref, const TerminationConfig& cfg) {
  if (robot.theta.size() != joint_target.size()) throw DimensionError("check_termination: joint sizes differ");
  if ((robot.base.p - world_ref.p).norm() > cfg.pos_threshold) {
    return {true, TerminationCause::Position};
  }
  const bool orient_fail = cfg.quat_mode == QuatTerminationMode::Angle
                               ? angle_between(robot.base.q, world_ref.q) > cfg.orient_threshold
                               : quat_im_norm(quat_mul(quat_conj(robot.base.q.canonical()), world_ref.q.canonical())) <
                                     cfg.orient_threshold;
  if (orient_fail) {
    return {true, TerminationCause::Orientation};
  }
  const std::size_t n = joint_target.size();
  std::size_t beyond = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(robot.theta[j] - joint_target[j]) > cfg.joint_threshold) ++beyond;
  }
  const bool joint_fail = cfg.joint_mode == JointTerminationMode::Any ? beyond > 0 : (n > 0 && beyond == n);
  if (joint_fail) {
    return {true, TerminationCause::Joint};
  }
  return {};
}

}  // namespace shadow
