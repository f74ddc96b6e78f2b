#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "quadnav/ppo.hpp"

namespace quadnav::testing {

// One-step bandit: fixed observation, reward -|a - a*|^2, every transition
// terminal. Runs the library's GAE and PPO update on hand-filled buffers.
struct BanditResult {
  double final_error = 0.0;  // max-abs distance of the mean action from a*
  int first_hit = -1;        // first iteration with error <= tolerance
  int iterations = 0;
};

inline BanditResult run_bandit(std::uint64_t seed, int max_iterations, double tolerance,
                               std::size_t batch = 64) {
  const std::array<double, 4> target{0.3, -0.2, 0.5, -0.4};
  PpoConfig cfg;

  Rng init = make_stream(seed, 1);
  MlpParams policy = make_policy_params(kObsDim, kActDim, cfg.hidden_units);
  MlpParams value = make_value_params(kObsDim, cfg.hidden_units);
  const double policy_gains[] = {std::sqrt(2.0), std::sqrt(2.0), 0.01};
  const double value_gains[] = {std::sqrt(2.0), std::sqrt(2.0), 1.0};
  init_orthogonal(policy, policy_gains, init, cfg.log_std_init);
  init_orthogonal(value, value_gains, init);
  AdamState policy_adam = make_adam_state(policy, cfg.adam());
  AdamState value_adam = make_adam_state(value, cfg.adam());
  RandomSource rng(seed);

  Matrix obs(static_cast<Eigen::Index>(kObsDim), 1);
  for (Eigen::Index k = 0; k < obs.rows(); ++k) obs(k, 0) = uniform(init, -1.0, 1.0);
  const Matrix obs_batch = obs.replicate(1, static_cast<Eigen::Index>(batch));

  auto mean_error = [&] {
    const Matrix mean = mlp_forward(policy, obs);
    double err = 0.0;
    for (std::size_t k = 0; k < kActDim; ++k) {
      err = std::max(err, std::abs(mean(static_cast<Eigen::Index>(k), 0) - target[k]));
    }
    return err;
  };

  BanditResult result;
  for (int it = 1; it <= max_iterations; ++it) {
    RolloutBuffer buf(1, batch);
    const Matrix mean = mlp_forward(policy, obs_batch);
    const Matrix values = mlp_forward(value, obs_batch);
    const Matrix actions = sample_action(mean, policy.log_std(), rng);
    const GaussianEval head = gaussian_head(mean, policy.log_std(), actions);
    for (std::size_t n = 0; n < batch; ++n) {
      const auto col = static_cast<Eigen::Index>(n);
      double reward = 0.0;
      for (std::size_t k = 0; k < kActDim; ++k) {
        const double a = actions(static_cast<Eigen::Index>(k), col);
        buf.actions[n * kActDim + k] = a;
        reward -= (a - target[k]) * (a - target[k]);
      }
      for (std::size_t k = 0; k < kObsDim; ++k) {
        buf.observations[n * kObsDim + k] = obs(static_cast<Eigen::Index>(k), 0);
      }
      buf.log_probs[n] = head.log_prob(col);
      buf.values[n] = values(0, col);
      buf.rewards[n] = reward;
      buf.terminated[n] = 1;
    }
    compute_gae(buf, cfg.gamma, cfg.gae_lambda);
    ppo_update(buf, policy, value, policy_adam, value_adam, cfg, rng);
    result.iterations = it;
    result.final_error = mean_error();
    if (result.first_hit < 0 && result.final_error <= tolerance) result.first_hit = it;
  }
  return result;
}

}  // namespace quadnav::testing
