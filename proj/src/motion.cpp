#include "shadow/motion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json_util.hpp"

namespace shadow {

using detail::json;

namespace {

// Times closer than this to a stored frame snap onto it.
constexpr double kGridSnap = 1e-9;

}  // namespace

double MotionTrajectory::duration() const {
  if (frames.empty()) return 0.0;
  return static_cast<double>(frames.size() - 1) / fps;
}

void MotionTrajectory::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw SchemaError("$.fps", "must be positive");
  }
  if (frames.empty()) {
    throw SchemaError("$.frames", "trajectory has no frames");
  }
  const std::size_t n = frames.front().theta.size();
  if (!joint_names.empty() && joint_names.size() != n) {
    throw SchemaError("$.joint_names", "length does not match frame joint vectors");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].theta.size() != n) {
      throw SchemaError("$.frames[" + std::to_string(i) + "].theta", "joint dimension differs from frame 0");
    }
  }
}

MotionFrame MotionTrajectory::at(double t) const {
  if (frames.empty()) {
    throw SchemaError("$.frames", "trajectory has no frames");
  }
  const double u = std::clamp(t, 0.0, duration()) * fps;
  auto i = static_cast<std::size_t>(std::floor(u + kGridSnap));
  if (i >= frames.size() - 1) return frames.back();
  const double frac = u - static_cast<double>(i);
  if (frac < kGridSnap) return frames[i];

  const MotionFrame& a = frames[i];
  const MotionFrame& b = frames[i + 1];
  MotionFrame out;
  out.p = a.p + (b.p - a.p) * frac;
  out.q = slerp(a.q, b.q, frac);
  out.theta.resize(a.theta.size());
  for (std::size_t j = 0; j < a.theta.size(); ++j) {
    out.theta[j] = a.theta[j] + (b.theta[j] - a.theta[j]) * frac;
  }
  return out;
}

MotionTrajectory load_motion(std::string_view json_text) {
  const json doc = detail::parse_document(json_text, "motion");
  MotionTrajectory traj;
  traj.fps = detail::as_number(detail::require(doc, "$", "fps"), "$.fps");
  if (!(traj.fps > 0.0)) {
    throw SchemaError("$.fps", "must be positive");
  }
  if (doc.contains("joint_names")) {
    const json& names = doc["joint_names"];
    if (!names.is_array()) throw SchemaError("$.joint_names", "expected an array of strings");
    for (std::size_t i = 0; i < names.size(); ++i) {
      traj.joint_names.push_back(detail::as_string(names[i], "$.joint_names[" + std::to_string(i) + "]"));
    }
  }
  const json& frames = detail::require(doc, "$", "frames");
  if (!frames.is_array()) throw SchemaError("$.frames", "expected an array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string path = "$.frames[" + std::to_string(i) + "]";
    MotionFrame f;
    f.p = detail::as_vec3(detail::require(frames[i], path, "p"), path + ".p");
    f.q = detail::as_quat(detail::require(frames[i], path, "q"), path + ".q");
    f.theta = detail::as_numbers(detail::require(frames[i], path, "theta"), path + ".theta");
    traj.frames.push_back(std::move(f));
  }
  traj.validate();
  return traj;
}

MotionTrajectory load_motion_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError(path, "cannot open motion file");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return load_motion(ss.str());
}

std::string save_motion(const MotionTrajectory& traj) {
  json doc;
  doc["fps"] = traj.fps;
  doc["joint_names"] = traj.joint_names;
  json frames = json::array();
  for (const MotionFrame& f : traj.frames) {
    frames.push_back({{"p", detail::to_json(f.p)}, {"q", detail::to_json(f.q)}, {"theta", f.theta}});
  }
  doc["frames"] = std::move(frames);
  return doc.dump() + "\n";
}

KeyframeSample sample_keyframes(const MotionTrajectory& traj, double t, double t_int, std::size_t count) {
  if (traj.frames.empty()) {
    throw SchemaError("$.frames", "trajectory has no frames");
  }
  if (!(t_int > 0.0) || count == 0) {
    throw std::invalid_argument("sample_keyframes: t_int must be positive and count at least 1");
  }
  const double end = traj.duration();
  KeyframeSample out;
  out.frames.reserve(count);
  out.reach_times.reserve(count);
  for (std::size_t k = 1; k <= count; ++k) {
    if (out.active > 0 && out.reach_times.back() >= end) {
      out.frames.push_back(out.frames.back());
      out.reach_times.push_back(out.reach_times.back());
      continue;
    }
    const double r = std::min(std::max(t, 0.0) + static_cast<double>(k) * t_int, end);
    out.frames.push_back(traj.at(r));
    out.reach_times.push_back(r);
    ++out.active;
  }
  return out;
}

double ground_offset(const MotionTrajectory& traj, const KinematicChain& chain) {
  double lowest = std::numeric_limits<double>::infinity();
  for (const MotionFrame& f : traj.frames) {
    const auto poses = forward_kinematics(chain, Pose{f.p, f.q}, f.theta);
    for (const Vec3& c : collision_points_world(chain, poses)) lowest = std::min(lowest, c.z);
  }
  if (!std::isfinite(lowest)) return 0.0;
  return std::max(0.0, -lowest);
}

MotionKind parse_motion_kind(std::string_view name) {
  if (name == "getup-2d") return MotionKind::GetUp2d;
  if (name == "crouch") return MotionKind::Crouch;
  if (name == "stand-reach") return MotionKind::StandReach;
  throw std::invalid_argument("unknown motion kind '" + std::string(name) + "'");
}

std::string_view motion_kind_name(MotionKind kind) {
  switch (kind) {
    case MotionKind::GetUp2d:
      return "getup-2d";
    case MotionKind::Crouch:
      return "crouch";
    case MotionKind::StandReach:
      return "stand-reach";
  }
  return "unknown";
}

namespace {

struct KeyPose {
  double phase;  // fraction of the duration
  double x, z, pitch;
  std::map<std::string, double> joints;
};

std::vector<KeyPose> key_poses(MotionKind kind) {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  switch (kind) {
    case MotionKind::GetUp2d:
      // Prone, head towards +x: lying -> kneel -> crouch -> stand.
      return {
          {0.0, 0.0, 0.1, kHalfPi, {{"chest", 0.0}, {"thigh", 0.0}, {"shin", 0.0}, {"upper_arm", 0.0}, {"forearm", 0.0}}},
          {0.15, 0.0, 0.1, kHalfPi, {{"chest", 0.0}, {"thigh", -0.3}, {"shin", 0.6}, {"upper_arm", -1.2}, {"forearm", 0.0}}},
          {0.45, 0.0, 0.42, 0.25, {{"chest", 0.0}, {"thigh", -0.25}, {"shin", 1.57}, {"upper_arm", -0.3}, {"forearm", -0.3}}},
          {0.75, 0.0, 0.38, 0.5, {{"chest", -0.2}, {"thigh", -1.6}, {"shin", 2.2}, {"upper_arm", -0.8}, {"forearm", -0.5}}},
          {1.0, 0.0, 0.77, 0.0, {{"chest", 0.0}, {"thigh", 0.0}, {"shin", 0.0}, {"upper_arm", 0.0}, {"forearm", 0.0}}},
      };
    case MotionKind::Crouch:
      return {
          {0.0, 0.0, 0.77, 0.0, {{"chest", 0.0}, {"thigh", 0.0}, {"shin", 0.0}, {"upper_arm", 0.0}, {"forearm", 0.0}}},
          {0.5, 0.0, 0.5, 0.3, {{"chest", 0.0}, {"thigh", -1.2}, {"shin", 1.8}, {"upper_arm", -0.8}, {"forearm", -0.4}}},
          {1.0, 0.0, 0.77, 0.0, {{"chest", 0.0}, {"thigh", 0.0}, {"shin", 0.0}, {"upper_arm", 0.0}, {"forearm", 0.0}}},
      };
    case MotionKind::StandReach:
      return {
          {0.0, 0.0, 0.77, 0.0, {{"upper_arm", 0.0}, {"forearm", 0.0}}},
          {0.3, 0.0, 0.77, 0.0, {{"upper_arm", -1.5}, {"forearm", -0.3}}},
          {0.6, 0.0, 0.77, 0.0, {{"upper_arm", -2.5}, {"forearm", -1.0}}},
          {1.0, 0.0, 0.77, 0.0, {{"upper_arm", 0.0}, {"forearm", 0.0}}},
      };
  }
  return {};
}

}  // namespace

MotionTrajectory gen_motion(MotionKind kind, const KinematicChain& chain, const MotionGenParams& params) {
  if (!(params.fps > 0.0) || !(params.duration > 0.0)) {
    throw std::invalid_argument("gen_motion: fps and duration must be positive");
  }
  const auto keys = key_poses(kind);
  const std::size_t nj = chain.num_joints();

  // Per key pose, the full joint vector (defaults where the key pose is silent).
  std::vector<std::vector<double>> key_theta;
  for (const KeyPose& k : keys) {
    std::vector<double> th = chain.default_pose();
    for (std::size_t j = 0; j < nj; ++j) {
      const std::string& name = chain.link(chain.joint_links()[j]).name;
      if (auto it = k.joints.find(name); it != k.joints.end()) th[j] = it->second;
    }
    key_theta.push_back(std::move(th));
  }

  MotionTrajectory traj;
  traj.fps = params.fps;
  for (int l : chain.joint_links()) traj.joint_names.push_back(chain.link(l).name);
  const auto n_frames = static_cast<std::size_t>(std::llround(params.duration * params.fps));
  if (n_frames < 2) {
    throw std::invalid_argument("gen_motion: duration * fps must give at least two frames");
  }
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double phase = static_cast<double>(i) / static_cast<double>(n_frames - 1);
    std::size_t s = 0;
    while (s + 2 < keys.size() && phase > keys[s + 1].phase) ++s;
    const KeyPose& a = keys[s];
    const KeyPose& b = keys[s + 1];
    const double u = std::clamp((phase - a.phase) / (b.phase - a.phase), 0.0, 1.0);
    MotionFrame f;
    f.p = {a.x + (b.x - a.x) * u, 0.0, a.z + (b.z - a.z) * u};
    f.q = qy(a.pitch + (b.pitch - a.pitch) * u);
    f.theta.resize(nj);
    for (std::size_t j = 0; j < nj; ++j) {
      f.theta[j] = key_theta[s][j] + (key_theta[s + 1][j] - key_theta[s][j]) * u;
    }
    traj.frames.push_back(std::move(f));
  }

  // The margin absorbs rounding so a re-scan reports exactly zero.
  const double h = ground_offset(traj, chain);
  if (h > 0.0) {
    for (MotionFrame& f : traj.frames) f.p.z += h + 1e-9;
  }
  return traj;
}

}  // namespace shadow
