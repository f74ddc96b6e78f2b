#include "quadnav/geom.hpp"

#include <string>

namespace quadnav {

Quat quat_normalize(const Quat& q) {
  const double n = q.norm();
  if (!(n > 1e-12)) {
    throw DegenerateQuaternion("quat_normalize: norm " + std::to_string(n) + " is degenerate");
  }
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat quat_mul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  const double s = std::sin(0.5 * angle) / n;
  return {std::cos(0.5 * angle), axis.x * s, axis.y * s, axis.z * s};
}

// v' = v + 2w (u × v) + 2 u × (u × v), u the vector part.
Vec3 rotate_body_to_world(const Quat& q, const Vec3& v_body) {
  const Vec3 u = q.vec();
  const Vec3 t = 2.0 * cross(u, v_body);
  return v_body + q.w * t + cross(u, t);
}

Vec3 rotate_world_to_body(const Quat& q, const Vec3& v_world) {
  return rotate_body_to_world(q.conj(), v_world);
}

Vec3 subtract_frame_transforms(const Vec3& p_robot, const Quat& q_robot, const Vec3& p_goal) {
  return rotate_world_to_body(q_robot, p_goal - p_robot);
}

Quat quat_integrate(const Quat& q, const Vec3& omega_body, double dt) {
  const Quat dq = quat_mul(q, Quat{0.0, omega_body.x, omega_body.y, omega_body.z});
  const double h = 0.5 * dt;
  return quat_normalize({q.w + h * dq.w, q.x + h * dq.x, q.y + h * dq.y, q.z + h * dq.z});
}

}  // namespace quadnav
