#pragma once

#include <stdexcept>
#include <string>

#include "quadnav/geom.hpp"

namespace quadnav {

struct RigidBodyState {
  Vec3 position;                  // m, world
  Quat orientation;               // body → world
  Vec3 lin_vel;                   // m/s, world
  Vec3 ang_vel;                   // rad/s, body

  bool finite() const {
    return position.finite() && orientation.finite() && lin_vel.finite() && ang_vel.finite();
  }
  bool operator==(const RigidBodyState&) const = default;
};

// Defaults describe a Crazyflie-class micro quadrotor.
struct BodyParams {
  double mass = 0.033;                       // kg
  Vec3 inertia_diag{1.4e-5, 1.4e-5, 2.17e-5};  // kg m^2, principal body axes
  double gravity = 9.81;                     // m/s^2

  bool operator==(const BodyParams&) const = default;
};

struct WrenchCommand {
  double thrust = 0.0;       // N along body +z
  Vec3 torque;               // N m, body
  Vec3 disturbance_world;    // N, world
};

class SimulationDivergence : public std::runtime_error {
 public:
  SimulationDivergence(const std::string& what, RigidBodyState state, long env_index = -1,
                       long step = -1)
      : std::runtime_error(what), state_(state), env_index_(env_index), step_(step) {}

  const RigidBodyState& state() const { return state_; }
  long env_index() const { return env_index_; }
  long step() const { return step_; }

 private:
  RigidBodyState state_;
  long env_index_;
  long step_;
};

void validate(const BodyParams& params);

// Rotational kinetic energy 1/2 ω^T I ω.
double rotational_energy(const Vec3& ang_vel, const BodyParams& params);

// One semi-implicit Euler step.
//
// Translation: v' = v + a dt, p' = p + v' dt with
//   a = (R (0,0,thrust) + disturbance + (0,0,-m g)) / m.
// Rotation: ω' = ω + dt I^-1 (τ - ω̄ × I ω̄) with ω̄ = (ω + ω')/2, solved by
// Newton iteration. The midpoint gyroscopic term keeps ½ωᵀIω and |Iω| exact
// under zero torque. Attitude: q' = quat_integrate(q, ω', dt).
//
// Throws SimulationDivergence when the result is not finite.
RigidBodyState step_rigid_body(const RigidBodyState& state, const WrenchCommand& cmd,
                               const BodyParams& params, double dt);

}  // namespace quadnav
