#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "quadnav/dynamics.hpp"
#include "quadnav/geom.hpp"
#include "quadnav/parallel.hpp"
#include "quadnav/random.hpp"

namespace quadnav {

inline constexpr std::size_t kObsDim = 12;
inline constexpr std::size_t kActDim = 4;

// lin_vel_body(3), ang_vel_body(3), projected_gravity(3), goal_body(3).
using Observation = std::array<double, kObsDim>;
// thrust, roll moment, pitch moment, yaw moment; each nominally in [-1, 1].
using Action = std::array<double, kActDim>;

// Indices into the per-step reward breakdown.
enum RewardTerm : std::size_t { kLinVelTerm = 0, kAngVelTerm, kDistanceTerm, kGoalTerm };
using RewardComponents = std::array<double, 4>;

struct EnvConfig {
  std::size_t num_envs = 4096;
  double physics_dt = 0.01;  // s
  int decimation = 2;        // physics steps per control step
  int episode_length = 500;  // control steps

  Vec3 workspace_min{-2.0, -2.0, 0.1};
  Vec3 workspace_max{2.0, 2.0, 3.0};
  Vec3 goal_box_min{-2.0, -2.0, 0.5};
  Vec3 goal_box_max{2.0, 2.0, 2.0};
  Vec3 spawn_box_min{-2.0, -2.0, 0.5};
  Vec3 spawn_box_max{2.0, 2.0, 2.0};

  double thrust_to_weight = 1.9;
  double moment_scale = 0.01;  // N m per unit action

  // R = dt (w_lin_vel |v|^2 + w_ang_vel |ω|^2 + w_distance (1 - tanh(d / distance_scale))
  //         + w_goal [d < goal_radius and |v| < goal_vel_threshold])
  double w_lin_vel = -0.05;
  double w_ang_vel = -0.01;
  double w_distance = 15.0;
  double w_goal = 10.0;
  double distance_scale = 0.8;  // m
  double goal_radius = 0.2;     // m
  double goal_vel_threshold = 0.1;  // m/s
  bool scale_goal_bonus_by_dt = true;
  // Consecutive goal-reached control steps that count as a successful arrival.
  int success_hold_steps = 25;

  BodyParams body;
  std::uint64_t seed = 0;

  double control_dt() const { return physics_dt * decimation; }
  bool operator==(const EnvConfig&) const = default;
};

// Throws std::invalid_argument naming the violated constraint.
void validate(const EnvConfig& cfg);

struct RewardResult {
  double reward = 0.0;
  RewardComponents components{};
  double distance = 0.0;
  bool goal_reached = false;
};

struct Termination {
  bool terminated = false;
  bool truncated = false;
};

struct StepInfo {
  RewardComponents components{};
  double distance = 0.0;
  bool goal_reached = false;
  // Observation of the state that ended the episode; equals the returned
  // observation unless the env was auto-reset.
  Observation final_observation{};
};

struct StepResult {
  Observation observation{};
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

// Per-control-step actuator perturbation. Defaults are a no-op.
struct Disturbance {
  double thrust_scale = 1.0;
  Vec3 wind_world;  // N
};

struct EpisodeState {
  RigidBodyState body;
  Vec3 goal;
  int step_count = 0;
  std::uint64_t episode_counter = 0;  // number of resets performed so far
};

WrenchCommand map_action(const Action& action, const EnvConfig& cfg);

Observation build_observation(const RigidBodyState& state, const Vec3& goal);

RewardResult compute_reward(const RigidBodyState& state, const Vec3& goal, const EnvConfig& cfg);

Termination check_termination(const RigidBodyState& state, int step_count, const EnvConfig& cfg);

// Samples spawn pose (level, uniform yaw), zero velocities and goal.
void sample_episode(EpisodeState& episode, const EnvConfig& cfg, Rng& rng);

// Map action once, hold the wrench for cfg.decimation physics steps, then
// score. Never resets; the caller owns episode boundaries.
StepResult control_step(EpisodeState& episode, const Action& action, const EnvConfig& cfg,
                        const Disturbance& disturbance = {});

// Vectorized navigation task with auto-reset. Env i draws its resets from the
// stream (seed, i, episode_counter), so its trajectory does not depend on the
// number of envs or worker threads.
class VecEnv {
 public:
  explicit VecEnv(EnvConfig cfg, std::size_t num_threads = 1);

  const EnvConfig& config() const { return cfg_; }
  std::size_t num_envs() const { return episodes_.size(); }

  std::vector<Observation> reset_all();
  Observation reset_env(std::size_t index);

  // Errors: SimulationDivergence carrying the env index and its step count.
  std::vector<StepResult> step_all(std::span<const Action> actions);

  Observation observation(std::size_t index) const;
  std::uint64_t env_steps() const { return env_steps_; }

  const std::vector<EpisodeState>& episodes() const { return episodes_; }
  // Checkpoint restore.
  void restore(std::vector<EpisodeState> episodes, std::uint64_t env_steps);

 private:
  EnvConfig cfg_;
  std::vector<EpisodeState> episodes_;
  std::uint64_t env_steps_ = 0;
  std::unique_ptr<ThreadPool> pool_;
};

}  // namespace quadnav
