#pragma once

#include <cmath>
#include <stdexcept>

namespace quadnav {

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
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  constexpr double squared_norm() const { return x * x + y * y + z * z; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
// Component-wise product, used for diagonal inertia.
constexpr Vec3 cwise_mul(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
constexpr Vec3 cwise_div(const Vec3& a, const Vec3& b) { return {a.x / b.x, a.y / b.y, a.z / b.z}; }

// Scalar-first Hamilton quaternion. A unit quaternion q maps body-frame
// vectors to the world frame: v_world = q * v_body * conj(q).
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Quat() = default;
  constexpr Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static constexpr Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }

  constexpr bool operator==(const Quat&) const = default;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  constexpr Quat conj() const { return {w, -x, -y, -z}; }
  constexpr Vec3 vec() const { return {x, y, z}; }
  bool finite() const {
    return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

class DegenerateQuaternion : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Throws DegenerateQuaternion when the norm is at or below 1e-12.
Quat quat_normalize(const Quat& q);

// Hamilton product a ⊗ b. With the body→world convention above, a ⊗ b is the
// rotation b (expressed in a's body frame) applied after a.
Quat quat_mul(const Quat& a, const Quat& b);

Quat quat_from_axis_angle(const Vec3& axis, double angle);

// R^T v, where R is the body→world rotation matrix of q.
Vec3 rotate_world_to_body(const Quat& q, const Vec3& v_world);

// R v.
Vec3 rotate_body_to_world(const Quat& q, const Vec3& v_body);

// Goal position expressed in the robot body frame.
Vec3 subtract_frame_transforms(const Vec3& p_robot, const Quat& q_robot, const Vec3& p_goal);

// First-order attitude update with body-frame rates, renormalized:
// q' = normalize(q + dt/2 · q ⊗ (0, omega_body)).
Quat quat_integrate(const Quat& q, const Vec3& omega_body, double dt);

}  // namespace quadnav
