#include "quadnav/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace quadnav {
namespace {

bool box_contains(const Vec3& lo, const Vec3& hi, const Vec3& p) {
  return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
}

bool box_valid(const Vec3& lo, const Vec3& hi) {
  return lo.finite() && hi.finite() && lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z;
}

bool box_within(const Vec3& lo, const Vec3& hi, const Vec3& outer_lo, const Vec3& outer_hi) {
  return box_contains(outer_lo, outer_hi, lo) && box_contains(outer_lo, outer_hi, hi);
}

double clamp_unit(double a) { return std::clamp(a, -1.0, 1.0); }

}  // namespace

void validate(const EnvConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("env config: ") + what);
  };
  require(cfg.num_envs >= 1, "num_envs must be at least 1");
  require(cfg.physics_dt > 0.0, "physics_dt must be positive");
  require(cfg.decimation >= 1, "decimation must be at least 1");
  require(cfg.episode_length >= 1, "episode_length must be at least 1");
  require(box_valid(cfg.workspace_min, cfg.workspace_max), "workspace box is empty");
  require(box_valid(cfg.goal_box_min, cfg.goal_box_max), "goal box is empty");
  require(box_valid(cfg.spawn_box_min, cfg.spawn_box_max), "spawn box is empty");
  require(box_within(cfg.goal_box_min, cfg.goal_box_max, cfg.workspace_min, cfg.workspace_max),
          "goal box must lie inside the workspace");
  require(box_within(cfg.spawn_box_min, cfg.spawn_box_max, cfg.workspace_min, cfg.workspace_max),
          "spawn box must lie inside the workspace");
  require(cfg.thrust_to_weight > 0.0, "thrust_to_weight must be positive");
  require(cfg.moment_scale >= 0.0, "moment_scale must be non-negative");
  require(cfg.w_lin_vel <= 0.0, "w_lin_vel must be <= 0");
  require(cfg.w_ang_vel <= 0.0, "w_ang_vel must be <= 0");
  require(cfg.w_distance >= 0.0, "w_distance must be >= 0");
  require(cfg.w_goal >= 0.0, "w_goal must be >= 0");
  require(cfg.distance_scale > 0.0, "distance_scale must be positive");
  require(cfg.goal_radius > 0.0, "goal_radius must be positive");
  require(cfg.goal_vel_threshold > 0.0, "goal_vel_threshold must be positive");
  require(cfg.success_hold_steps >= 1, "success_hold_steps must be at least 1");
  validate(cfg.body);
}

WrenchCommand map_action(const Action& action, const EnvConfig& cfg) {
  const BodyParams& body = cfg.body;
  WrenchCommand cmd;
  const double throttle = 0.5 * (clamp_unit(action[0]) + 1.0);
  cmd.thrust = throttle * body.mass * body.gravity * cfg.thrust_to_weight;
  cmd.torque = Vec3{clamp_unit(action[1]), clamp_unit(action[2]), clamp_unit(action[3])} *
               cfg.moment_scale;
  return cmd;
}

Observation build_observation(const RigidBodyState& state, const Vec3& goal) {
  const Quat& q = state.orientation;
  const Vec3 lin_vel_body = rotate_world_to_body(q, state.lin_vel);
  const Vec3 gravity_body = rotate_world_to_body(q, {0.0, 0.0, -1.0});
  const Vec3 goal_body = subtract_frame_transforms(state.position, q, goal);
  return {lin_vel_body.x, lin_vel_body.y, lin_vel_body.z,
          state.ang_vel.x, state.ang_vel.y, state.ang_vel.z,
          gravity_body.x, gravity_body.y, gravity_body.z,
          goal_body.x, goal_body.y, goal_body.z};
}

RewardResult compute_reward(const RigidBodyState& state, const Vec3& goal, const EnvConfig& cfg) {
  const double dt = cfg.control_dt();
  RewardResult r;
  r.distance = (state.position - goal).norm();
  const double speed_sq = state.lin_vel.squared_norm();
  r.goal_reached = r.distance < cfg.goal_radius &&
                   std::sqrt(speed_sq) < cfg.goal_vel_threshold;

  r.components[kLinVelTerm] = dt * cfg.w_lin_vel * speed_sq;
  r.components[kAngVelTerm] = dt * cfg.w_ang_vel * state.ang_vel.squared_norm();
  r.components[kDistanceTerm] = dt * cfg.w_distance * (1.0 - std::tanh(r.distance / cfg.distance_scale));
  const double bonus_scale = cfg.scale_goal_bonus_by_dt ? dt : 1.0;
  r.components[kGoalTerm] = r.goal_reached ? bonus_scale * cfg.w_goal : 0.0;

  r.reward = r.components[0] + r.components[1] + r.components[2] + r.components[3];
  return r;
}

Termination check_termination(const RigidBodyState& state, int step_count, const EnvConfig& cfg) {
  Termination t;
  t.terminated = !state.finite() ||
                 !box_contains(cfg.workspace_min, cfg.workspace_max, state.position);
  t.truncated = step_count >= cfg.episode_length;
  return t;
}

void sample_episode(EpisodeState& episode, const EnvConfig& cfg, Rng& rng) {
  RigidBodyState body;
  body.position = {uniform(rng, cfg.spawn_box_min.x, cfg.spawn_box_max.x),
                   uniform(rng, cfg.spawn_box_min.y, cfg.spawn_box_max.y),
                   uniform(rng, cfg.spawn_box_min.z, cfg.spawn_box_max.z)};
  const double yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
  body.orientation = quat_from_axis_angle({0.0, 0.0, 1.0}, yaw);
  episode.body = body;
  episode.goal = {uniform(rng, cfg.goal_box_min.x, cfg.goal_box_max.x),
                  uniform(rng, cfg.goal_box_min.y, cfg.goal_box_max.y),
                  uniform(rng, cfg.goal_box_min.z, cfg.goal_box_max.z)};
  episode.step_count = 0;
}

StepResult control_step(EpisodeState& episode, const Action& action, const EnvConfig& cfg,
                        const Disturbance& disturbance) {
  WrenchCommand cmd = map_action(action, cfg);
  cmd.thrust *= disturbance.thrust_scale;
  cmd.disturbance_world = disturbance.wind_world;

  RigidBodyState state = episode.body;
  for (int k = 0; k < cfg.decimation; ++k) {
    state = step_rigid_body(state, cmd, cfg.body, cfg.physics_dt);
  }
  episode.body = state;
  ++episode.step_count;

  const RewardResult reward = compute_reward(state, episode.goal, cfg);
  const Termination term = check_termination(state, episode.step_count, cfg);

  StepResult result;
  result.observation = build_observation(state, episode.goal);
  result.reward = reward.reward;
  result.terminated = term.terminated;
  result.truncated = term.truncated;
  result.info.components = reward.components;
  result.info.distance = reward.distance;
  result.info.goal_reached = reward.goal_reached;
  result.info.final_observation = result.observation;
  return result;
}

VecEnv::VecEnv(EnvConfig cfg, std::size_t num_threads)
    : cfg_(std::move(cfg)),
      episodes_(cfg_.num_envs),
      pool_(std::make_unique<ThreadPool>(num_threads)) {
  validate(cfg_);
}

Observation VecEnv::reset_env(std::size_t index) {
  if (index >= episodes_.size()) throw std::out_of_range("reset_env: env index out of range");
  EpisodeState& ep = episodes_[index];
  Rng rng = make_stream(cfg_.seed, index, ep.episode_counter);
  sample_episode(ep, cfg_, rng);
  ++ep.episode_counter;
  return build_observation(ep.body, ep.goal);
}

std::vector<Observation> VecEnv::reset_all() {
  std::vector<Observation> obs(episodes_.size());
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    episodes_[i].episode_counter = 0;
    obs[i] = reset_env(i);
  }
  env_steps_ = 0;
  return obs;
}

Observation VecEnv::observation(std::size_t index) const {
  const EpisodeState& ep = episodes_.at(index);
  return build_observation(ep.body, ep.goal);
}

std::vector<StepResult> VecEnv::step_all(std::span<const Action> actions) {
  if (actions.size() != episodes_.size()) {
    throw std::invalid_argument("step_all: expected one action per environment");
  }
  std::vector<StepResult> results(episodes_.size());
  pool_->parallel_for(episodes_.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        results[i] = control_step(episodes_[i], actions[i], cfg_);
      } catch (const SimulationDivergence& e) {
        throw SimulationDivergence(e.what(), e.state(), static_cast<long>(i),
                                   episodes_[i].step_count);
      }
      if (results[i].terminated || results[i].truncated) {
        results[i].observation = reset_env(i);
      }
    }
  });
  env_steps_ += episodes_.size();
  return results;
}

void VecEnv::restore(std::vector<EpisodeState> episodes, std::uint64_t env_steps) {
  if (episodes.size() != episodes_.size()) {
    throw std::invalid_argument("restore: env count mismatch");
  }
  episodes_ = std::move(episodes);
  env_steps_ = env_steps;
}

}  // namespace quadnav
