#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shadow/error.hpp"
#include "shadow/geom.hpp"

namespace shadow {

enum class JointType { Revolute, Fixed };

struct Link {
  std::string name;
  int parent = -1;  ///< index into KinematicChain::links, -1 for the root
  Pose origin;      ///< joint frame relative to the parent link frame
  Vec3 axis{0.0, 1.0, 0.0};
  JointType type = JointType::Fixed;
  double lower = 0.0;
  double upper = 0.0;
  double torque_limit = 0.0;
  double mass = 0.0;
  std::vector<Vec3> collision_points;
  /// Centre of mass in the link frame. Defaults to the centroid of the link
  /// origin and its collision points.
  Vec3 com;
  // Actuator defaults; optional in the chain file.
  double kp = 0.0;
  double kd = 0.0;
  std::optional<double> joint_inertia;
  double joint_friction = 0.0;
};

/// Serial/tree kinematic chain in topological order. Immutable once loaded.
class KinematicChain {
 public:
  KinematicChain() = default;
  /// Validates and takes ownership of the link list. Throws SchemaError.
  KinematicChain(std::vector<Link> links, std::vector<std::string> target_links,
                 std::vector<double> default_pose);

  const std::vector<Link>& links() const { return links_; }
  const Link& link(std::size_t i) const { return links_.at(i); }
  std::size_t num_links() const { return links_.size(); }
  std::size_t num_joints() const { return joint_links_.size(); }

  /// Link index of the i-th revolute joint.
  const std::vector<int>& joint_links() const { return joint_links_; }
  /// Joint index of link i, or -1 for fixed links.
  int joint_of_link(std::size_t i) const { return link_joint_.at(i); }

  const std::vector<std::string>& target_link_names() const { return target_names_; }
  const std::vector<int>& target_links() const { return targets_; }
  std::size_t num_targets() const { return targets_.size(); }
  const std::vector<double>& default_pose() const { return default_pose_; }

  std::optional<int> find(std::string_view name) const;

  std::vector<double> lower_limits() const;
  std::vector<double> upper_limits() const;
  std::vector<double> torque_limits() const;
  double total_mass() const;

  /// Effective inertia of each joint: the file value if given, else the mass of
  /// every link downstream of the joint times 0.1 m^2.
  std::vector<double> joint_inertias() const;
  /// True if link `i` is `ancestor` or lies below it.
  bool is_descendant(int i, int ancestor) const;

 private:
  std::vector<Link> links_;
  std::vector<std::string> target_names_;
  std::vector<int> targets_;
  std::vector<double> default_pose_;
  std::vector<int> joint_links_;
  std::vector<int> link_joint_;
};

KinematicChain load_chain(std::string_view json_text);
KinematicChain load_chain_file(const std::string& path);
std::string save_chain(const KinematicChain& chain);

/// World (or base, for identity `base`) pose of every link, indexed like the chain.
using LinkPoseSet = std::vector<Pose>;

LinkPoseSet forward_kinematics(const KinematicChain& chain, const Pose& base,
                               std::span<const double> theta);

/// Target link positions under the base frame, in target_links order.
std::vector<Vec3> link_positions_in_base(const KinematicChain& chain, std::span<const double> theta);

/// Flattened [x0, y0, z0, x1, ...] form of link_positions_in_base.
std::vector<double> link_positions_flat(const KinematicChain& chain, std::span<const double> theta);

/// World positions of every collision point, link by link.
std::vector<Vec3> collision_points_world(const KinematicChain& chain, const LinkPoseSet& poses);

}  // namespace shadow
