#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadnav/env.hpp"
#include "quadnav/net.hpp"
#include "quadnav/random.hpp"

namespace quadnav {

struct PpoConfig {
  std::size_t rollout_length = 32;  // control steps per env per iteration
  int epochs = 5;
  std::size_t minibatches = 4;
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  std::uint64_t total_env_steps = 10'000'000;
  bool advantage_normalization = true;

  double learning_rate = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t hidden_units = 128;
  double log_std_init = -1.0;

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
  bool operator==(const PpoConfig&) const = default;
};

void validate(const PpoConfig& cfg, std::size_t num_envs);

class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// T x N transitions, flattened with index t * N + n.
struct RolloutBuffer {
  RolloutBuffer() = default;
  RolloutBuffer(std::size_t steps, std::size_t envs);

  std::size_t steps = 0;
  std::size_t envs = 0;
  std::vector<double> observations;      // (T N) x 12
  std::vector<double> actions;           // (T N) x 4, raw samples
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> truncated;
  std::vector<double> bootstrap_values;  // V(final state) where truncated
  std::vector<double> last_values;       // N, V(obs after the last step)
  std::vector<double> advantages;
  std::vector<double> returns;
  bool has_advantages = false;

  std::size_t size() const { return steps * envs; }
  std::size_t index(std::size_t t, std::size_t n) const { return t * envs + n; }
};

// δ_t = r_t + γ V_next (1 - terminated_t) - V_t, A_t = δ_t + γλ (1 - done_t) A_{t+1}.
// V_next is the stored bootstrap value at a truncation, the next step's value
// inside an episode and last_values at the rollout tail. The recursion is cut
// at every episode boundary (terminated or truncated).
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

// Population-statistics normalization: (A - mean) / (std + 1e-8).
void normalize_advantages(std::vector<double>& advantages);

struct CompletedEpisode {
  double episode_return = 0.0;
  int length = 0;
  bool success = false;
};

// Running per-env episode statistics plus a window of recent completions.
struct EpisodeTracker {
  static constexpr std::size_t kWindow = 100;

  EpisodeTracker() = default;
  EpisodeTracker(std::size_t num_envs, int success_hold_steps);

  void record(std::size_t env, double reward, bool goal_reached, bool done);

  double mean_return() const;
  double mean_length() const;
  double success_rate() const;

  int success_hold_steps = 25;
  std::vector<double> running_return;
  std::vector<int> running_length;
  std::vector<int> goal_streak;
  std::vector<std::uint8_t> succeeded;
  std::deque<CompletedEpisode> recent;
  std::uint64_t completed = 0;
};

// Collects T vectorized steps with the stochastic policy. `obs` holds the
// current observation of every env and is advanced in place.
RolloutBuffer collect_rollout(VecEnv& env, std::vector<Observation>& obs, const MlpParams& policy,
                              const MlpParams& value_net, std::size_t steps, RandomSource& rng,
                              EpisodeTracker* tracker = nullptr);

// Samples for one gradient step; columns are samples.
struct Minibatch {
  Matrix observations;  // 12 x M
  Matrix actions;       // 4 x M
  Vector old_log_probs;
  Vector advantages;
  Vector returns;
};

struct LossReport {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// total = L_clip + value_coef L_value - entropy_coef H. When the gradient
// pointers are non-null they receive exact gradients of `total`.
LossReport ppo_loss(const MlpParams& policy, const MlpParams& value_net, const Minibatch& batch,
                    const PpoConfig& cfg, Gradients* policy_grad = nullptr,
                    Gradients* value_grad = nullptr);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Scales both gradients so their joint L2 norm is at most max_norm. Returns
// the pre-clip norm.
double clip_grad_norm(Gradients& a, Gradients& b, double max_norm);

// Epochs of shuffled minibatch updates. Requires compute_gae beforehand.
// Throws TrainingDivergence on a non-finite loss.
UpdateStats ppo_update(RolloutBuffer& buffer, MlpParams& policy, MlpParams& value_net,
                       AdamState& policy_adam, AdamState& value_adam, const PpoConfig& cfg,
                       RandomSource& rng);

struct TrainMetrics {
  std::uint64_t iteration = 0;
  std::uint64_t env_steps = 0;
  double mean_episode_return = 0.0;
  double mean_episode_length = 0.0;
  double goal_reach_rate = 0.0;
  double mean_reward_per_step = 0.0;
  std::uint64_t episodes_completed = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double wall_clock_s = 0.0;
};

// Owns the whole learner state: env, networks, optimizers and RNG.
class PpoTrainer {
 public:
  PpoTrainer(EnvConfig env_cfg, PpoConfig ppo_cfg, std::uint64_t seed, std::size_t num_threads = 1);

  // One collect → GAE → update cycle.
  TrainMetrics iterate();
  bool finished() const { return env_.env_steps() >= ppo_cfg_.total_env_steps; }

  const EnvConfig& env_config() const { return env_.config(); }
  const PpoConfig& ppo_config() const { return ppo_cfg_; }
  void set_total_env_steps(std::uint64_t steps) { ppo_cfg_.total_env_steps = steps; }

  std::uint64_t iteration() const { return iteration_; }
  std::uint64_t env_steps() const { return env_.env_steps(); }

  MlpParams& policy() { return policy_; }
  const MlpParams& policy() const { return policy_; }
  MlpParams& value_net() { return value_; }
  const MlpParams& value_net() const { return value_; }
  AdamState& policy_adam() { return policy_adam_; }
  const AdamState& policy_adam() const { return policy_adam_; }
  AdamState& value_adam() { return value_adam_; }
  const AdamState& value_adam() const { return value_adam_; }
  RandomSource& rng() { return rng_; }
  const RandomSource& rng() const { return rng_; }
  VecEnv& env() { return env_; }
  const VecEnv& env() const { return env_; }
  EpisodeTracker& tracker() { return tracker_; }
  const EpisodeTracker& tracker() const { return tracker_; }

  // Re-derives observations after the env state was restored.
  void restore(std::uint64_t iteration);

 private:
  PpoConfig ppo_cfg_;
  VecEnv env_;
  MlpParams policy_;
  MlpParams value_;
  AdamState policy_adam_;
  AdamState value_adam_;
  RandomSource rng_;
  EpisodeTracker tracker_;
  std::vector<Observation> obs_;
  std::uint64_t iteration_ = 0;
};

}  // namespace quadnav
