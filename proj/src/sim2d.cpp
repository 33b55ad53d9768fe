#include "shadow/sim2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "shadow/error.hpp"

namespace shadow {

namespace {

constexpr double kReachSlack = 1e-9;

double uniform(std::mt19937_64& rng, const Interval& iv) {
  if (iv.hi <= iv.lo) return iv.lo;
  return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
}

bool within(const Interval& iv, double v) { return v >= iv.lo - 1e-12 && v <= iv.hi + 1e-12; }

// Rotation by `pitch` about +y restricted to the x-z plane.
Vec3 rot_y(double pitch, const Vec3& v) {
  const double c = std::cos(pitch);
  const double s = std::sin(pitch);
  return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

}  // namespace

DomainRand DomainRandRanges::sample(std::mt19937_64& rng) const {
  DomainRand s;
  s.mass_scale = uniform(rng, mass_scale);
  s.com_offset = uniform(rng, com_offset);
  s.kp_scale = uniform(rng, kp_scale);
  s.kd_scale = uniform(rng, kd_scale);
  s.motor_delay = uniform(rng, motor_delay);
  return s;
}

bool DomainRandRanges::contains(const DomainRand& s) const {
  return within(mass_scale, s.mass_scale) && within(com_offset, s.com_offset) && within(kp_scale, s.kp_scale) &&
         within(kd_scale, s.kd_scale) && within(motor_delay, s.motor_delay);
}

void EnvConfig::validate() const {
  if (!(dt_policy > 0.0) || substeps < 1) throw std::invalid_argument("env: dt_policy and substeps must be positive");
  if (!(contact.k_n > 0.0) || contact.c_n < 0.0 || contact.k_t < 0.0 || contact.mu < 0.0) {
    throw std::invalid_argument("env: contact stiffness must be positive and gains non-negative");
  }
  if (!(base_inertia > 0.0)) throw std::invalid_argument("env: base_inertia must be positive");
  if (!(gain_scale >= 0.0)) throw std::invalid_argument("env: gain_scale must be non-negative");
  if (keyframes < 1) throw std::invalid_argument("env: keyframes must be at least 1");
  if (history < 1) throw std::invalid_argument("env: history must be at least 1");
  if (!(t_int.lo > 0.0) || t_int.hi < t_int.lo) throw std::invalid_argument("env: t_int range must be positive");
  if (init_ratio.lo < 0.0 || init_ratio.hi > 1.0 || init_ratio.hi < init_ratio.lo) {
    throw std::invalid_argument("env: init_ratio must lie in [0, 1]");
  }
  reward.validate();
  termination.validate();
}

DynamicParams apply_domain_rand(const KinematicChain& chain, const EnvConfig& cfg, const DomainRand& sample) {
  if (!cfg.rand.contains(sample)) {
    throw std::invalid_argument("apply_domain_rand: sample lies outside the configured intervals");
  }
  const std::size_t nj = chain.num_joints();
  DynamicParams p;
  for (const Link& l : chain.links()) {
    p.link_mass.push_back(l.mass * sample.mass_scale);
    p.total_mass += p.link_mass.back();
  }
  p.com_offset = sample.com_offset;
  if (!cfg.kp.empty() && cfg.kp.size() != nj) throw DimensionError("env.kp: expected one gain per joint");
  if (!cfg.kd.empty() && cfg.kd.size() != nj) throw DimensionError("env.kd: expected one gain per joint");
  const auto inertia = chain.joint_inertias();
  for (std::size_t j = 0; j < nj; ++j) {
    const Link& l = chain.link(chain.joint_links()[j]);
    const double kp = cfg.kp.empty() ? l.kp : cfg.kp[j];
    const double kd = cfg.kd.empty() ? l.kd : cfg.kd[j];
    p.kp.push_back(kp * cfg.gain_scale * sample.kp_scale);
    p.kd.push_back(kd * cfg.gain_scale * sample.kd_scale);
    p.joint_inertia.push_back(inertia[j] * sample.mass_scale);
    p.joint_friction.push_back(l.joint_friction);
  }
  p.delay_substeps = static_cast<int>(std::llround(sample.motor_delay / cfg.substep_dt()));
  return p;
}

std::vector<double> pd_torque(std::span<const double> kp, std::span<const double> kd, std::span<const double> target,
                              std::span<const double> theta, std::span<const double> theta_dot,
                              std::span<const double> tau_max) {
  const std::size_t n = target.size();
  if (kp.size() != n || kd.size() != n || theta.size() != n || theta_dot.size() != n || tau_max.size() != n) {
    throw DimensionError("pd_torque: argument sizes differ");
  }
  std::vector<double> tau(n);
  for (std::size_t j = 0; j < n; ++j) {
    tau[j] = std::clamp(kp[j] * (target[j] - theta[j]) - kd[j] * theta_dot[j], -tau_max[j], tau_max[j]);
  }
  return tau;
}

Vec3 contact_force(const Vec3& pos, const Vec3& vel, const ContactParams& cfg) {
  const double depth = std::max(0.0, -pos.z);
  if (depth == 0.0) return {};
  const double fz = std::max(0.0, cfg.k_n * depth - cfg.c_n * vel.z);
  const double cap = cfg.mu * fz;
  const double fx = -std::clamp(cfg.k_t * vel.x, -cap, cap);
  const double fy = -std::clamp(cfg.k_t * vel.y, -cap, cap);
  return {fx, fy, fz};
}

Pose SimState::base() const { return {{x, 0.0, z}, qy(pitch)}; }

Env::Env(std::shared_ptr<const KinematicChain> chain, std::shared_ptr<const MotionTrajectory> traj, EnvConfig cfg,
         std::uint64_t seed)
    : chain_(std::move(chain)), traj_(*traj), cfg_(std::move(cfg)), rng_(seed) {
  cfg_.validate();
  traj_.validate();
  if (traj_.joint_count() != chain_->num_joints()) {
    throw DimensionError("Env: motion has " + std::to_string(traj_.joint_count()) + " joints, chain has " +
                         std::to_string(chain_->num_joints()));
  }
  const double lift = ground_offset(traj_, *chain_);
  for (MotionFrame& f : traj_.frames) f.p.z += lift;
  lower_ = chain_->lower_limits();
  upper_ = chain_->upper_limits();
  tau_max_ = chain_->torque_limits();
  reset();
}

std::size_t Env::obs_width() const { return static_cast<std::size_t>(cfg_.history) * (6 + 3 * num_joints()); }

std::size_t Env::token_width() const { return CommandFrame::width(num_joints(), chain_->num_targets()); }

void Env::reset(const ResetOptions& opts) {
  const std::size_t nj = num_joints();
  const double ratio = opts.init_ratio ? *opts.init_ratio : uniform(rng_, cfg_.init_ratio);
  rand_ = opts.rand ? *opts.rand : (cfg_.randomize ? cfg_.rand.sample(rng_) : DomainRand{});
  t_int_ = opts.t_int ? *opts.t_int : uniform(rng_, cfg_.t_int);
  dyn_ = apply_domain_rand(*chain_, cfg_, rand_);

  const auto last = static_cast<double>(traj_.frames.size() - 1);
  const auto idx = static_cast<std::size_t>(std::llround(std::clamp(ratio, 0.0, 1.0) * last));
  const MotionFrame& f = traj_.frames[idx];

  state_ = SimState{};
  state_.x = f.p.x;
  state_.z = f.p.z + cfg_.spawn_height;
  state_.pitch = planar_pitch(f.q);
  state_.theta = f.theta;
  state_.theta_dot.assign(nj, 0.0);
  state_.prev_theta_dot.assign(nj, 0.0);
  state_.prev_action.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    state_.prev_action[j] = (f.theta[j] - chain_->default_pose()[j]) / cfg_.action_scale;
  }
  state_.prev_prev_action = state_.prev_action;
  state_.time = static_cast<double>(idx) / traj_.fps;

  delay_line_.assign(static_cast<std::size_t>(dyn_.delay_substeps) + 1, state_.theta);
  seq_ = build_command_sequence(traj_, *chain_, state_.robot(), state_.time, t_int_, cfg_.keyframes);
  history_.clear();
  const auto frame = observation_frame();
  for (int h = 0; h < cfg_.history; ++h) history_.push_back(frame);
}

Vec3 Env::com_world(const LinkPoseSet& poses) const {
  Vec3 sum;
  for (std::size_t i = 0; i < chain_->num_links(); ++i) {
    sum += poses[i].transform_point(chain_->link(i).com) * dyn_.link_mass[i];
  }
  return sum / dyn_.total_mass + rot_y(state_.pitch, {dyn_.com_offset, 0.0, 0.0});
}

std::vector<double> Env::physics_substep(std::span<const double> target, Vec3* contact_sum) {
  const std::size_t nj = num_joints();
  const double h = cfg_.substep_dt();
  const KinematicChain& chain = *chain_;

  const Pose base = state_.base();
  const auto poses = forward_kinematics(chain, base, state_.theta);
  const Vec3 c = com_world(poses);
  const Vec3 w = state_.ang_vel();
  const Vec3 p = base.p;
  const Vec3 d = p - c;
  const Vec3 v_com = state_.lin_vel() - cross(w, d);

  // Contact forces at the start of the substep.
  Vec3 force;
  double torque_y = 0.0;
  for (std::size_t i = 0; i < chain.num_links(); ++i) {
    for (const Vec3& local : chain.link(i).collision_points) {
      const Vec3 r = poses[i].transform_point(local);
      if (r.z >= 0.0) continue;
      Vec3 v = state_.lin_vel() + cross(w, r - p);
      for (int l = static_cast<int>(i); l >= 0; l = chain.link(l).parent) {
        const int j = chain.joint_of_link(l);
        if (j < 0) continue;
        const Vec3 axis = rotate_vec(poses[l].q, chain.link(l).axis);
        v += cross(axis, r - poses[l].p) * state_.theta_dot[j];
      }
      const Vec3 f = contact_force(r, v, cfg_.contact);
      force += f;
      const Vec3 arm = r - c;
      torque_y += arm.z * f.x - arm.x * f.z;
    }
  }
  if (contact_sum) *contact_sum += force;

  // Joints: independent inertial double integrators under PD torque.
  auto tau = pd_torque(dyn_.kp, dyn_.kd, target, state_.theta, state_.theta_dot, tau_max_);
  for (std::size_t j = 0; j < nj; ++j) {
    const double acc = (tau[j] - dyn_.joint_friction[j] * state_.theta_dot[j]) / dyn_.joint_inertia[j];
    state_.theta_dot[j] += acc * h;
    state_.theta[j] += state_.theta_dot[j] * h;
  }

  // Base: one rigid body. Semi-implicit Euler on contact forces; the constant
  // gravity term is integrated exactly.
  const Vec3 g{0.0, 0.0, -cfg_.gravity};
  const Vec3 v_com_next = v_com + (force / dyn_.total_mass + g) * h;
  const double w_next = state_.pitch_rate + torque_y / cfg_.base_inertia * h;
  const Vec3 c_next = c + v_com_next * h - g * (0.5 * h * h);
  const double pitch_next = state_.pitch + w_next * h;
  const Vec3 d_body = rot_y(-state_.pitch, d);
  const Vec3 d_next = rot_y(pitch_next, d_body);
  const Vec3 v_next = v_com_next + cross({0.0, w_next, 0.0}, d_next);

  state_.x = c_next.x + d_next.x;
  state_.z = c_next.z + d_next.z;
  state_.pitch = pitch_next;
  state_.vx = v_next.x;
  state_.vz = v_next.z;
  state_.pitch_rate = w_next;
  return tau;
}

StepResult Env::step(std::span<const double> action) {
  const std::size_t nj = num_joints();
  if (action.size() != nj) {
    throw DimensionError("Env::step: expected " + std::to_string(nj) + " actions, got " + std::to_string(action.size()));
  }
  std::vector<double> target(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    target[j] = std::clamp(chain_->default_pose()[j] + cfg_.action_scale * action[j], lower_[j], upper_[j]);
  }

  StepResult res;
  res.info.torque.assign(nj, 0.0);
  const std::vector<double> theta_dot_before = state_.theta_dot;
  Vec3 contact_sum;
  for (int s = 0; s < cfg_.substeps; ++s) {
    delay_line_.push_back(target);
    delay_line_.pop_front();
    const auto tau = physics_substep(delay_line_.front(), &contact_sum);
    for (std::size_t j = 0; j < nj; ++j) {
      if (std::abs(tau[j]) > std::abs(res.info.torque[j])) res.info.torque[j] = tau[j];
    }
  }
  res.info.contact_force_sum = contact_sum / static_cast<double>(cfg_.substeps);

  state_.prev_theta_dot = theta_dot_before;
  state_.steps += 1;
  state_.time += cfg_.dt_policy;

  bool finite = std::isfinite(state_.x) && std::isfinite(state_.z) && std::isfinite(state_.pitch) &&
                std::abs(state_.vx) < cfg_.divergence_limit && std::abs(state_.vz) < cfg_.divergence_limit &&
                std::abs(state_.pitch_rate) < cfg_.divergence_limit;
  for (std::size_t j = 0; j < nj; ++j) {
    finite = finite && std::isfinite(state_.theta[j]) && std::abs(state_.theta_dot[j]) < cfg_.divergence_limit;
  }
  if (!finite) {
    res.diverged = true;
    res.terminated = true;
    return res;
  }

  res.info.joint_acc.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    res.info.joint_acc[j] = (state_.theta_dot[j] - theta_dot_before[j]) / cfg_.dt_policy;
    res.info.max_joint_acc = std::max(res.info.max_joint_acc, std::abs(res.info.joint_acc[j]));
  }
  res.r_reg = regularization_reward(state_.theta_dot, theta_dot_before, action, state_.prev_action, cfg_.dt_policy,
                                    cfg_.reward);
  res.r_safety = safety_reward(state_.theta, res.info.torque, *chain_, cfg_.reward);

  state_.prev_prev_action = state_.prev_action;
  state_.prev_action.assign(action.begin(), action.end());

  const RobotState robot = state_.robot();
  refresh_errors(seq_, robot, *chain_, state_.time);
  if (seq_.active > 0 && state_.time + kReachSlack >= seq_.reach_times.front()) {
    const double reached = seq_.reach_times.front();
    res.r_task = task_reward(robot, seq_.frames.front().joint_target, seq_.world_refs.front(), cfg_.reward);
    const TerminationResult term = check_termination(robot, seq_.frames.front().joint_target,
                                                     seq_.world_refs.front(), cfg_.termination);
    res.info.consumed_keyframe = state_.consumed++;
    res.info.cause = term.cause;
    if (term.terminate) {
      res.terminated = true;
    } else if (reached >= traj_.duration()) {
      res.truncated = true;
    } else {
      seq_ = build_command_sequence(traj_, *chain_, robot, reached, t_int_, cfg_.keyframes);
      refresh_errors(seq_, robot, *chain_, state_.time);
    }
  }
  push_history();
  return res;
}

std::vector<double> Env::observation_frame() const {
  std::vector<double> f;
  f.reserve(6 + 3 * num_joints());
  const Quat q = state_.base().q;
  const Vec3 w = rotate_vec(quat_conj(q), state_.ang_vel());
  const Vec3 g = projected_gravity(q);
  f.insert(f.end(), {w.x, w.y, w.z, g.x, g.y, g.z});
  f.insert(f.end(), state_.theta.begin(), state_.theta.end());
  f.insert(f.end(), state_.theta_dot.begin(), state_.theta_dot.end());
  f.insert(f.end(), state_.prev_action.begin(), state_.prev_action.end());
  return f;
}

void Env::push_history() {
  history_.push_back(observation_frame());
  while (history_.size() > static_cast<std::size_t>(cfg_.history)) history_.pop_front();
}

std::vector<double> Env::observe() const {
  std::vector<double> out;
  out.reserve(obs_width());
  for (const auto& f : history_) out.insert(out.end(), f.begin(), f.end());
  return out;
}

double Env::center_of_mass_height() const {
  return com_world(forward_kinematics(*chain_, state_.base(), state_.theta)).z;
}

Vec3 Env::base_momentum() const {
  const auto poses = forward_kinematics(*chain_, state_.base(), state_.theta);
  const Vec3 c = com_world(poses);
  const Vec3 v_com = state_.lin_vel() - cross(state_.ang_vel(), state_.base().p - c);
  return v_com * dyn_.total_mass;
}

double Env::base_energy() const {
  const auto poses = forward_kinematics(*chain_, state_.base(), state_.theta);
  const Vec3 c = com_world(poses);
  const Vec3 v_com = state_.lin_vel() - cross(state_.ang_vel(), state_.base().p - c);
  double e = 0.5 * dyn_.total_mass * dot(v_com, v_com) + 0.5 * cfg_.base_inertia * state_.pitch_rate * state_.pitch_rate +
             dyn_.total_mass * cfg_.gravity * c.z;
  for (const Vec3& r : collision_points_world(*chain_, poses)) {
    if (r.z < 0.0) e += 0.5 * cfg_.contact.k_n * r.z * r.z;
  }
  return e;
}

double Env::max_penetration() const {
  const auto poses = forward_kinematics(*chain_, state_.base(), state_.theta);
  double deepest = 0.0;
  for (const Vec3& r : collision_points_world(*chain_, poses)) deepest = std::max(deepest, -r.z);
  return deepest;
}

}  // namespace shadow
