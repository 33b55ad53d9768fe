#include "shadow/command.hpp"

#include "shadow/error.hpp"

namespace shadow {

void CommandFrame::append_features(std::vector<double>& out) const {
  out.insert(out.end(), {base_pos.x, base_pos.y, base_pos.z, base_rot.v.x, base_rot.v.y, base_rot.v.z});
  out.insert(out.end(), joint_target.begin(), joint_target.end());
  out.insert(out.end(), link_target.begin(), link_target.end());
  out.insert(out.end(), joint_err.begin(), joint_err.end());
  out.insert(out.end(), link_err.begin(), link_err.end());
  out.push_back(t_passed);
  out.push_back(t_left);
}

std::vector<double> CommandSequence::tokens() const {
  std::vector<double> out;
  for (const CommandFrame& f : frames) f.append_features(out);
  return out;
}

std::vector<double> CommandSequence::t_lefts() const {
  std::vector<double> out;
  out.reserve(num_keyframes());
  for (std::size_t k = 0; k < num_keyframes(); ++k) out.push_back(frames[k].t_left);
  return out;
}

namespace {

CommandFrame state_target(const RobotState& robot, const std::vector<double>& links, double t_passed) {
  CommandFrame f;
  f.joint_target = robot.theta;
  f.link_target = links;
  f.joint_err.assign(robot.theta.size(), 0.0);
  f.link_err.assign(links.size(), 0.0);
  f.t_passed = t_passed;
  f.t_left = 0.0;
  f.is_state_target = true;
  return f;
}

void update_errors(CommandFrame& f, const RobotState& robot, const std::vector<double>& links) {
  for (std::size_t j = 0; j < robot.theta.size(); ++j) f.joint_err[j] = f.joint_target[j] - robot.theta[j];
  for (std::size_t i = 0; i < links.size(); ++i) f.link_err[i] = f.link_target[i] - links[i];
}

}  // namespace

CommandSequence build_command_sequence(const MotionTrajectory& traj, const KinematicChain& chain,
                                       const RobotState& robot, double now, double t_int, std::size_t count) {
  if (traj.joint_count() != chain.num_joints() || robot.theta.size() != chain.num_joints()) {
    throw DimensionError("build_command_sequence: motion has " + std::to_string(traj.joint_count()) +
                         " joints, chain has " + std::to_string(chain.num_joints()) + ", robot state has " +
                         std::to_string(robot.theta.size()));
  }
  const KeyframeSample sample = sample_keyframes(traj, now, t_int, count);
  const std::vector<double> links_now = link_positions_flat(chain, robot.theta);

  CommandSequence seq;
  seq.t_refresh = now;
  seq.active = sample.active;
  seq.reach_times = sample.reach_times;
  for (std::size_t k = 0; k < count; ++k) {
    const MotionFrame& ref = sample.frames[k];
    const Pose world_ref{ref.p, ref.q};
    const Pose rel = relative_pose(robot.base, world_ref);
    CommandFrame f;
    f.base_pos = rel.p;
    f.base_rot = AxisAngle::from_quat(rel.q);
    f.joint_target = ref.theta;
    f.link_target = link_positions_flat(chain, ref.theta);
    f.joint_err.resize(ref.theta.size());
    f.link_err.resize(f.link_target.size());
    update_errors(f, robot, links_now);
    f.t_passed = 0.0;
    f.t_left = sample.reach_times[k] - now;
    seq.frames.push_back(std::move(f));
    seq.world_refs.push_back(world_ref);
  }
  seq.frames.push_back(state_target(robot, links_now, 0.0));
  return seq;
}

void refresh_errors(CommandSequence& seq, const RobotState& robot, const KinematicChain& chain, double now) {
  const std::vector<double> links_now = link_positions_flat(chain, robot.theta);
  const double passed = now - seq.t_refresh;
  for (std::size_t k = 0; k < seq.num_keyframes(); ++k) {
    CommandFrame& f = seq.frames[k];
    update_errors(f, robot, links_now);
    f.t_passed = passed;
    f.t_left = seq.reach_times[k] - now;
  }
  seq.frames.back() = state_target(robot, links_now, passed);
}

}  // namespace shadow
