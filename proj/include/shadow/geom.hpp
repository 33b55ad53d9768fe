#pragma once

#include <array>
#include <cmath>

namespace shadow {

/// Plain 3-vector used by the geometry and kinematics code.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  std::array<double, 3> to_array() const { return {x, y, z}; }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Unit quaternion, scalar first, Hamilton product convention.
///
/// The four-argument constructor normalizes its input so a Quat is always a
/// rotation. Use canonical() to pick the w >= 0 representative of the double
/// cover.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Quat() = default;
  Quat(double w_, double x_, double y_, double z_);

  static Quat identity() { return {}; }
  /// Keeps the components bit-for-bit; they must already be unit norm within 1e-9.
  static Quat from_unit(double w, double x, double y, double z);
  /// Rotation of `angle` radians about `axis` (need not be unit, must be nonzero).
  static Quat from_axis_angle(const Vec3& axis, double angle);
  /// Rotation vector (axis * angle) to quaternion.
  static Quat from_rotation_vector(const Vec3& v);

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quat canonical() const;
  Vec3 im() const { return {x, y, z}; }
  std::array<double, 4> to_array() const { return {w, x, y, z}; }

  bool operator==(const Quat&) const = default;

 private:
  struct Raw {};
  constexpr Quat(Raw, double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}
  friend Quat quat_mul(const Quat&, const Quat&);
  friend Quat quat_conj(const Quat&);
};

inline Quat qx(double angle) { return Quat::from_axis_angle({1, 0, 0}, angle); }
inline Quat qy(double angle) { return Quat::from_axis_angle({0, 1, 0}, angle); }
inline Quat qz(double angle) { return Quat::from_axis_angle({0, 0, 1}, angle); }

Quat quat_mul(const Quat& a, const Quat& b);
Quat quat_conj(const Quat& q);
Vec3 rotate_vec(const Quat& q, const Vec3& v);

/// Rotation angle in [0, pi] of the canonical form of q.
double quat_angle(const Quat& q);
/// Geodesic distance between two orientations, in [0, pi].
double angle_between(const Quat& a, const Quat& b);
/// Norm of the imaginary part, sqrt(x^2 + y^2 + z^2).
double quat_im_norm(const Quat& q);

/// Shortest-arc spherical interpolation, u in [0, 1].
Quat slerp(const Quat& a, const Quat& b, double u);

/// Axis-angle vector (axis * angle) with angle in [0, pi].
struct AxisAngle {
  Vec3 v;

  static AxisAngle from_quat(const Quat& q);
  Quat to_quat() const { return Quat::from_rotation_vector(v); }
  double angle() const { return v.norm(); }
};

struct Pose {
  Vec3 p;
  Quat q;

  static Pose identity() { return {}; }
  Vec3 transform_point(const Vec3& local) const { return p + rotate_vec(q, local); }
};

/// this ∘ other: `other` expressed in this frame, mapped to the parent frame.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

/// Target re-expressed in the frame of `base`:
/// p = R(base.q)^T (target.p - base.p), q = conj(base.q) * target.q (canonical).
Pose relative_pose(const Pose& base, const Pose& target);

/// Heading correction aligning a replayed reference with the robot heading.
///
/// q_correct = q_robot * conj(q_ref); the yaw of q_correct is extracted with
/// gamma = atan2(2 (w z + x y), 1 - 2 (y^2 + z^2)) and returned as a pure
/// z-rotation (cos(gamma/2), 0, 0, sin(gamma/2)). Ill-conditioned when the
/// pitch of q_correct is +-90 degrees; no special casing is applied there.
Quat yaw_correction(const Quat& q_ref, const Quat& q_robot);

/// The yaw angle gamma used by yaw_correction.
double yaw_of(const Quat& q);

/// World gravity direction (0, 0, -1) expressed in the frame of q.
Vec3 projected_gravity(const Quat& q);

/// Pitch (rotation about +y) of a quaternion after projecting onto the x-z plane.
double planar_pitch(const Quat& q);

}  // namespace shadow
