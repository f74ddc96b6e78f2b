#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "quadnav/env.hpp"
#include "quadnav/net.hpp"

namespace quadnav {

enum class WindMode { kConstant, kRandomDirection };

struct PerturbationConfig {
  // Thrust is scaled by (1 + η), η ~ N(0, std^2), drawn once per control step.
  double thrust_noise_std = 0.0;
  // World-frame force. In kRandomDirection mode only its magnitude is used and
  // each episode draws a horizontal direction uniformly.
  Vec3 wind_force;
  WindMode wind_mode = WindMode::kConstant;

  bool operator==(const PerturbationConfig&) const = default;
};

void validate(const PerturbationConfig& p);

// One control step of a recorded episode. `state` is the state the action was
// applied to and `distance` belongs to it, so the first row has d/d0 = 1.
// Reward terms and goal_reached describe the resulting transition.
struct TrajectoryRow {
  int step = 0;
  double time = 0.0;  // s
  RigidBodyState state;
  Action action{};
  RewardComponents components{};
  double reward = 0.0;
  double distance = 0.0;
  double normalized_distance = 0.0;  // d / d0
  double thrust_scale = 1.0;
  bool goal_reached = false;  // after the transition
};

struct Trajectory {
  Vec3 goal;
  Vec3 wind;
  std::vector<TrajectoryRow> rows;
  RigidBodyState final_state;
};

struct EpisodeSummary {
  bool success = false;
  bool terminated = false;
  int length = 0;
  double initial_distance = 0.0;
  double final_distance = 0.0;
  double normalized_final_distance = 0.0;
  double time_to_goal = -1.0;  // s; first goal-reached instant of the qualifying hold, -1 if none
  double episode_return = 0.0;
  RewardComponents component_sums{};
  Vec3 final_offset;             // final position - goal
  double downwind_offset = 0.0;  // final_offset projected on the wind direction
};

struct EvalReport {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double mean_final_distance = 0.0;
  double median_final_distance = 0.0;
  // Over successful episodes; NaN when there are none.
  double mean_normalized_final_distance_success = 0.0;
  double mean_time_to_goal = 0.0;
  double mean_episode_return = 0.0;
  RewardComponents mean_component_returns{};
  Vec3 mean_final_offset;
  double mean_lateral_error = 0.0;  // horizontal |final offset|
  double mean_downwind_error = 0.0;
  std::vector<EpisodeSummary> per_episode;
  std::vector<Trajectory> trajectories;  // filled when recording
};

// Any action source. May also edit the episode (scripted test hooks).
using PolicyFn = std::function<Action(EpisodeState& episode, const Observation& obs)>;

// Deterministic action = policy mean.
PolicyFn mean_policy(const MlpParams& policy);

struct EvalOptions {
  bool record_trajectories = false;
  std::size_t num_threads = 1;
};

// Runs n_episodes full-length episodes. Episode k starts from the reset stream
// (seed, k, 0), so reports for different perturbations share start/goal pairs.
// Success: goal_reached holds for env_cfg.success_hold_steps consecutive steps.
EvalReport evaluate(const EnvConfig& env_cfg, const PolicyFn& policy, std::size_t n_episodes,
                    const PerturbationConfig& perturbation, std::uint64_t seed,
                    const EvalOptions& options = {});

EvalReport evaluate(const EnvConfig& env_cfg, const MlpParams& policy, std::size_t n_episodes,
                    const PerturbationConfig& perturbation, std::uint64_t seed,
                    const EvalOptions& options = {});

// One report per grid point with a common seed.
std::vector<EvalReport> sweep_perturbations(const EnvConfig& env_cfg, const MlpParams& policy,
                                            const std::vector<PerturbationConfig>& grid,
                                            std::size_t n_episodes, std::uint64_t seed,
                                            const EvalOptions& options = {});

// Re-simulates the recorded actions and disturbances from the first recorded
// state. Returns the position after each step.
std::vector<Vec3> replay_trajectory(const Trajectory& trajectory, const EnvConfig& env_cfg);

// Output formats.
std::string eval_report_csv(const std::vector<PerturbationConfig>& perturbations,
                            const std::vector<EvalReport>& reports);
std::string eval_summary_text(const PerturbationConfig& perturbation, const EvalReport& report);
std::string trajectory_csv(const Trajectory& trajectory);
Trajectory parse_trajectory_csv(const std::string& text);

}  // namespace quadnav
