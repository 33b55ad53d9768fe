#include "shadow/geom.hpp"

#include <algorithm>
#include <stdexcept>

namespace shadow {

Quat::Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("Quat: cannot normalize a zero or non-finite quaternion");
  }
  w /= n;
  x /= n;
  y /= n;
  z /= n;
}

Quat Quat::from_unit(double w_, double x_, double y_, double z_) {
  const double n = std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_);
  if (!(std::abs(n - 1.0) <= 1e-9)) {
    throw std::invalid_argument("Quat::from_unit: components are not unit norm");
  }
  return Quat(Raw{}, w_, x_, y_, z_);
}

Quat Quat::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) {
    throw std::invalid_argument("Quat::from_axis_angle: zero axis");
  }
  const double s = std::sin(0.5 * angle) / n;
  return {std::cos(0.5 * angle), axis.x * s, axis.y * s, axis.z * s};
}

Quat Quat::from_rotation_vector(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-12) {
    // First-order expansion keeps tiny rotations exact to rounding.
    return {1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z};
  }
  return from_axis_angle(v, angle);
}

Quat Quat::canonical() const {
  if (w < 0.0 || (w == 0.0 && (x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0)))))) {
    return Quat(Raw{}, -w, -x, -y, -z);
  }
  return *this;
}

Quat quat_mul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat quat_conj(const Quat& q) { return Quat(Quat::Raw{}, q.w, -q.x, -q.y, -q.z); }

Vec3 rotate_vec(const Quat& q, const Vec3& v) {
  // v' = v + 2 u x (u x v + w v), u = im(q)
  const Vec3 u = q.im();
  const Vec3 t = cross(u, v) * 2.0;
  return v + t * q.w + cross(u, t);
}

double quat_im_norm(const Quat& q) { return q.im().norm(); }

double quat_angle(const Quat& q) {
  const Quat c = q.canonical();
  // atan2 form stays accurate near 0 and pi, unlike acos(w).
  return 2.0 * std::atan2(c.im().norm(), c.w);
}

double angle_between(const Quat& a, const Quat& b) { return quat_angle(quat_mul(quat_conj(a), b)); }

Quat slerp(const Quat& a, const Quat& b, double u) {
  double bw = b.w, bx = b.x, by = b.y, bz = b.z;
  double d = a.w * bw + a.x * bx + a.y * by + a.z * bz;
  if (d < 0.0) {
    d = -d;
    bw = -bw;
    bx = -bx;
    by = -by;
    bz = -bz;
  }
  double s0 = 1.0 - u;
  double s1 = u;
  if (d < 1.0 - 1e-12) {
    const double theta = std::acos(std::clamp(d, -1.0, 1.0));
    const double st = std::sin(theta);
    s0 = std::sin((1.0 - u) * theta) / st;
    s1 = std::sin(u * theta) / st;
  }
  return {s0 * a.w + s1 * bw, s0 * a.x + s1 * bx, s0 * a.y + s1 * by, s0 * a.z + s1 * bz};
}

AxisAngle AxisAngle::from_quat(const Quat& q) {
  const Quat c = q.canonical();
  const double s = c.im().norm();
  if (s < 1e-12) {
    return {c.im() * 2.0};
  }
  const double angle = 2.0 * std::atan2(s, c.w);
  return {c.im() * (angle / s)};
}

Pose compose(const Pose& a, const Pose& b) { return {a.p + rotate_vec(a.q, b.p), quat_mul(a.q, b.q)}; }

Pose inverse(const Pose& a) {
  const Quat qi = quat_conj(a.q);
  return {-rotate_vec(qi, a.p), qi};
}

Pose relative_pose(const Pose& base, const Pose& target) {
  const Quat qi = quat_conj(base.q);
  return {rotate_vec(qi, target.p - base.p), quat_mul(qi, target.q).canonical()};
}

double yaw_of(const Quat& q) {
  return std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z));
}

Quat yaw_correction(const Quat& q_ref, const Quat& q_robot) {
  const Quat q_correct = quat_mul(q_robot, quat_conj(q_ref));
  const double gamma = yaw_of(q_correct);
  Quat out;
  out.w = std::cos(0.5 * gamma);
  out.z = std::sin(0.5 * gamma);
  return out;
}

Vec3 projected_gravity(const Quat& q) { return rotate_vec(quat_conj(q), {0.0, 0.0, -1.0}); }

double planar_pitch(const Quat& q) {
  const Vec3 fwd = rotate_vec(q, {1.0, 0.0, 0.0});
  return std::atan2(-fwd.z, fwd.x);
}

}  // namespace shadow
