#include "shadow/kinematics.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json_util.hpp"

namespace shadow {

using detail::json;

namespace {

constexpr double kAxisTolerance = 1e-9;

std::string link_path(std::size_t i) { return "$.links[" + std::to_string(i) + "]"; }

}  // namespace

KinematicChain::KinematicChain(std::vector<Link> links, std::vector<std::string> target_links,
                               std::vector<double> default_pose)
    : links_(std::move(links)), target_names_(std::move(target_links)), default_pose_(std::move(default_pose)) {
  if (links_.empty()) {
    throw SchemaError("$.links", "chain must contain at least one link");
  }
  int roots = 0;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const Link& l = links_[i];
    const std::string path = link_path(i);
    for (std::size_t j = 0; j < i; ++j) {
      if (links_[j].name == l.name) {
        throw SchemaError(path + ".name", "duplicate link name '" + l.name + "'");
      }
    }
    if (l.parent < 0) {
      ++roots;
    } else if (static_cast<std::size_t>(l.parent) >= i) {
      throw SchemaError(path + ".parent", "parent must precede its child (topological order)");
    }
    if (l.type == JointType::Revolute) {
      if (std::abs(l.axis.norm() - 1.0) > kAxisTolerance) {
        throw SchemaError(path + ".axis", "joint axis must be unit norm");
      }
      if (!(l.lower < l.upper)) {
        throw SchemaError(path + ".limits", "lower limit must be below upper limit");
      }
      if (!(l.torque_limit > 0.0)) {
        throw SchemaError(path + ".torque_limit", "must be positive for a revolute joint");
      }
      if (l.parent < 0) {
        throw SchemaError(path + ".type", "the root link carries the floating base and cannot be revolute");
      }
    }
    if (l.mass < 0.0) {
      throw SchemaError(path + ".mass", "must be non-negative");
    }
  }
  if (roots != 1) {
    throw SchemaError("$.links", "exactly one root link (parent null) is required, found " + std::to_string(roots));
  }

  link_joint_.assign(links_.size(), -1);
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].type == JointType::Revolute) {
      link_joint_[i] = static_cast<int>(joint_links_.size());
      joint_links_.push_back(static_cast<int>(i));
    }
  }

  for (std::size_t t = 0; t < target_names_.size(); ++t) {
    auto idx = find(target_names_[t]);
    if (!idx) {
      throw SchemaError("$.target_links[" + std::to_string(t) + "]", "unknown link '" + target_names_[t] + "'");
    }
    targets_.push_back(*idx);
  }
  if (default_pose_.size() != joint_links_.size()) {
    throw SchemaError("$.default_pose", "expected " + std::to_string(joint_links_.size()) + " values");
  }
}

std::optional<int> KinematicChain::find(std::string_view name) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].name == name) {
      return static_cast<int>(i);
    }
  }
  return std::nullopt;
}

std::vector<double> KinematicChain::lower_limits() const {
  std::vector<double> out;
  for (int l : joint_links_) out.push_back(links_[l].lower);
  return out;
}

std::vector<double> KinematicChain::upper_limits() const {
  std::vector<double> out;
  for (int l : joint_links_) out.push_back(links_[l].upper);
  return out;
}

std::vector<double> KinematicChain::torque_limits() const {
  std::vector<double> out;
  for (int l : joint_links_) out.push_back(links_[l].torque_limit);
  return out;
}

double KinematicChain::total_mass() const {
  double m = 0.0;
  for (const auto& l : links_) m += l.mass;
  return m;
}

bool KinematicChain::is_descendant(int i, int ancestor) const {
  while (i >= 0) {
    if (i == ancestor) return true;
    i = links_[i].parent;
  }
  return false;
}

std::vector<double> KinematicChain::joint_inertias() const {
  std::vector<double> out;
  for (int l : joint_links_) {
    if (links_[l].joint_inertia) {
      out.push_back(*links_[l].joint_inertia);
      continue;
    }
    double m = 0.0;
    for (std::size_t i = 0; i < links_.size(); ++i) {
      if (is_descendant(static_cast<int>(i), l)) m += links_[i].mass;
    }
    out.push_back(m * 0.1);
  }
  return out;
}

KinematicChain load_chain(std::string_view json_text) {
  const json doc = detail::parse_document(json_text, "chain");
  const json& jl = detail::require(doc, "$", "links");
  if (!jl.is_array()) {
    throw SchemaError("$.links", "expected an array");
  }
  if (jl.empty()) {
    throw SchemaError("$.links", "chain must contain at least one link");
  }

  // Resolve parent names first so cycles are reported as such rather than as
  // ordering violations.
  std::map<std::string, std::size_t> by_name;
  std::vector<std::string> parent_names(jl.size());
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const std::string path = link_path(i);
    const std::string name = detail::as_string(detail::require(jl[i], path, "name"), path + ".name");
    if (!by_name.emplace(name, i).second) {
      throw SchemaError(path + ".name", "duplicate link name '" + name + "'");
    }
    const json& p = detail::require(jl[i], path, "parent");
    if (!p.is_null()) parent_names[i] = detail::as_string(p, path + ".parent");
  }
  for (std::size_t i = 0; i < jl.size(); ++i) {
    if (!parent_names[i].empty() && !by_name.count(parent_names[i])) {
      throw SchemaError(link_path(i) + ".parent", "unknown parent '" + parent_names[i] + "'");
    }
  }
  for (std::size_t i = 0; i < jl.size(); ++i) {
    std::size_t cur = i;
    for (std::size_t steps = 0; !parent_names[cur].empty(); ++steps) {
      if (steps > jl.size()) {
        throw SchemaError(link_path(i) + ".parent", "parent cycle through link '" + jl[i]["name"].get<std::string>() + "'");
      }
      cur = by_name.at(parent_names[cur]);
    }
  }

  std::vector<Link> links;
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const json& j = jl[i];
    const std::string path = link_path(i);
    Link l;
    l.name = j["name"].get<std::string>();
    l.parent = parent_names[i].empty() ? -1 : static_cast<int>(by_name.at(parent_names[i]));
    const json& o = detail::require(j, path, "origin");
    l.origin.p = detail::as_vec3(detail::require(o, path + ".origin", "p"), path + ".origin.p");
    l.origin.q = detail::as_quat(detail::require(o, path + ".origin", "q"), path + ".origin.q");
    const std::string type = detail::as_string(detail::require(j, path, "type"), path + ".type");
    if (type == "revolute") {
      l.type = JointType::Revolute;
    } else if (type == "fixed") {
      l.type = JointType::Fixed;
    } else {
      throw SchemaError(path + ".type", "expected 'revolute' or 'fixed', got '" + type + "'");
    }
    if (l.type == JointType::Revolute || j.contains("axis")) {
      l.axis = detail::as_vec3(detail::require(j, path, "axis"), path + ".axis");
    }
    if (l.type == JointType::Revolute || j.contains("limits")) {
      const auto lim = detail::as_numbers(detail::require(j, path, "limits"), path + ".limits", 2);
      l.lower = lim[0];
      l.upper = lim[1];
    }
    if (l.type == JointType::Revolute || j.contains("torque_limit")) {
      l.torque_limit = detail::as_number(detail::require(j, path, "torque_limit"), path + ".torque_limit");
    }
    l.mass = detail::as_number(detail::require(j, path, "mass"), path + ".mass");
    const json& cp = detail::require(j, path, "collision_points");
    if (!cp.is_array()) {
      throw SchemaError(path + ".collision_points", "expected an array of 3-vectors");
    }
    for (std::size_t c = 0; c < cp.size(); ++c) {
      l.collision_points.push_back(detail::as_vec3(cp[c], path + ".collision_points[" + std::to_string(c) + "]"));
    }
    if (j.contains("com")) {
      l.com = detail::as_vec3(j["com"], path + ".com");
    } else {
      Vec3 sum;
      for (const Vec3& c : l.collision_points) sum += c;
      l.com = sum / static_cast<double>(l.collision_points.size() + 1);
    }
    if (j.contains("kp")) l.kp = detail::as_number(j["kp"], path + ".kp");
    if (j.contains("kd")) l.kd = detail::as_number(j["kd"], path + ".kd");
    if (j.contains("joint_inertia")) l.joint_inertia = detail::as_number(j["joint_inertia"], path + ".joint_inertia");
    if (j.contains("joint_friction")) l.joint_friction = detail::as_number(j["joint_friction"], path + ".joint_friction");
    links.push_back(std::move(l));
  }

  std::vector<std::string> targets;
  const json& jt = detail::require(doc, "$", "target_links");
  if (!jt.is_array()) {
    throw SchemaError("$.target_links", "expected an array of link names");
  }
  for (std::size_t t = 0; t < jt.size(); ++t) {
    targets.push_back(detail::as_string(jt[t], "$.target_links[" + std::to_string(t) + "]"));
  }
  auto pose = detail::as_numbers(detail::require(doc, "$", "default_pose"), "$.default_pose");
  return KinematicChain(std::move(links), std::move(targets), std::move(pose));
}

KinematicChain load_chain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError(path, "cannot open chain file");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return load_chain(ss.str());
}

std::string save_chain(const KinematicChain& chain) {
  json links = json::array();
  for (const Link& l : chain.links()) {
    json j;
    j["name"] = l.name;
    j["parent"] = l.parent < 0 ? json(nullptr) : json(chain.link(l.parent).name);
    j["origin"] = {{"p", detail::to_json(l.origin.p)}, {"q", detail::to_json(l.origin.q)}};
    j["type"] = l.type == JointType::Revolute ? "revolute" : "fixed";
    j["axis"] = detail::to_json(l.axis);
    j["limits"] = {l.lower, l.upper};
    j["torque_limit"] = l.torque_limit;
    j["mass"] = l.mass;
    json cps = json::array();
    for (const Vec3& c : l.collision_points) cps.push_back(detail::to_json(c));
    j["collision_points"] = cps;
    j["com"] = detail::to_json(l.com);
    j["kp"] = l.kp;
    j["kd"] = l.kd;
    if (l.joint_inertia) j["joint_inertia"] = *l.joint_inertia;
    j["joint_friction"] = l.joint_friction;
    links.push_back(std::move(j));
  }
  json doc;
  doc["links"] = links;
  doc["target_links"] = chain.target_link_names();
  doc["default_pose"] = chain.default_pose();
  return doc.dump(2) + "\n";
}

LinkPoseSet forward_kinematics(const KinematicChain& chain, const Pose& base, std::span<const double> theta) {
  if (theta.size() != chain.num_joints()) {
    throw DimensionError("forward_kinematics: expected " + std::to_string(chain.num_joints()) +
                         " joint values, got " + std::to_string(theta.size()));
  }
  LinkPoseSet poses(chain.num_links());
  for (std::size_t i = 0; i < chain.num_links(); ++i) {
    const Link& l = chain.link(i);
    if (l.parent < 0) {
      poses[i] = base;
      continue;
    }
    Pose p = compose(poses[l.parent], l.origin);
    const int j = chain.joint_of_link(i);
    if (j >= 0) {
      p.q = quat_mul(p.q, Quat::from_axis_angle(l.axis, theta[j]));
    }
    poses[i] = p;
  }
  return poses;
}

std::vector<Vec3> link_positions_in_base(const KinematicChain& chain, std::span<const double> theta) {
  const auto poses = forward_kinematics(chain, Pose::identity(), theta);
  std::vector<Vec3> out;
  out.reserve(chain.num_targets());
  for (int t : chain.target_links()) out.push_back(poses[t].p);
  return out;
}

std::vector<double> link_positions_flat(const KinematicChain& chain, std::span<const double> theta) {
  std::vector<double> out;
  for (const Vec3& v : link_positions_in_base(chain, theta)) {
    out.insert(out.end(), {v.x, v.y, v.z});
  }
  return out;
}

std::vector<Vec3> collision_points_world(const KinematicChain& chain, const LinkPoseSet& poses) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < chain.num_links(); ++i) {
    for (const Vec3& c : chain.link(i).collision_points) out.push_back(poses[i].transform_point(c));
  }
  return out;
}

}  // namespace shadow
