#include "quadnav/dynamics.hpp"

#include <Eigen/Dense>

namespace quadnav {
namespace {

Eigen::Vector3d to_eigen(const Vec3& v) { return {v.x, v.y, v.z}; }
Vec3 from_eigen(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0;
  return s;
}

constexpr int kMaxNewtonIterations = 12;

// Solves x = ω + dt I^-1 (τ - m × I m), m = (ω + x)/2.
Vec3 integrate_rates(const Vec3& omega, const Vec3& torque, const Vec3& inertia, double dt) {
  auto residual = [&](const Vec3& x) {
    const Vec3 m = 0.5 * (omega + x);
    return x - omega - dt * cwise_div(torque - cross(m, cwise_mul(inertia, m)), inertia);
  };

  Vec3 x = omega + dt * cwise_div(torque - cross(omega, cwise_mul(inertia, omega)), inertia);
  const Eigen::Matrix3d inertia_mat = to_eigen(inertia).asDiagonal();
  const Eigen::Matrix3d inertia_inv = to_eigen(inertia).cwiseInverse().asDiagonal();
  for (int it = 0; it < kMaxNewtonIterations; ++it) {
    const Vec3 f = residual(x);
    if (f.x == 0.0 && f.y == 0.0 && f.z == 0.0) break;
    const Vec3 m = 0.5 * (omega + x);
    const Eigen::Matrix3d jg = skew(m) * inertia_mat - skew(cwise_mul(inertia, m));
    const Eigen::Matrix3d jf = Eigen::Matrix3d::Identity() + 0.5 * dt * inertia_inv * jg;
    const Vec3 dx = from_eigen(jf.partialPivLu().solve(to_eigen(f)));
    x = x - dx;
    if (dx.squared_norm() <= 1e-34 * (1.0 + x.squared_norm())) break;
  }
  return x;
}

}  // namespace

void validate(const BodyParams& params) {
  if (!(params.mass > 0.0)) throw std::invalid_argument("body mass must be positive");
  if (!(params.inertia_diag.x > 0.0 && params.inertia_diag.y > 0.0 &&
        params.inertia_diag.z > 0.0)) {
    throw std::invalid_argument("body inertia components must be positive");
  }
}

double rotational_energy(const Vec3& ang_vel, const BodyParams& params) {
  return 0.5 * dot(ang_vel, cwise_mul(params.inertia_diag, ang_vel));
}

RigidBodyState step_rigid_body(const RigidBodyState& state, const WrenchCommand& cmd,
                               const BodyParams& params, double dt) {
  // Summing forces before dividing keeps thrust = m g an exact fixed point.
  const Vec3 force = rotate_body_to_world(state.orientation, {0.0, 0.0, cmd.thrust}) +
                     cmd.disturbance_world + Vec3{0.0, 0.0, -params.mass * params.gravity};
  const Vec3 accel = force / params.mass;

  RigidBodyState next;
  next.lin_vel = state.lin_vel + accel * dt;
  next.position = state.position + next.lin_vel * dt;
  next.ang_vel = integrate_rates(state.ang_vel, cmd.torque, params.inertia_diag, dt);
  if (!next.ang_vel.finite()) {
    throw SimulationDivergence("non-finite angular velocity", state);
  }
  try {
    next.orientation = quat_integrate(state.orientation, next.ang_vel, dt);
  } catch (const DegenerateQuaternion&) {
    throw SimulationDivergence("degenerate attitude", state);
  }
  if (!next.finite()) throw SimulationDivergence("non-finite rigid-body state", state);
  return next;
}

}  // namespace quadnav
