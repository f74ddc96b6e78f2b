#include "quadnav/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace quadnav {

void validate(const PpoConfig& cfg, std::size_t num_envs) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("ppo config: ") + what);
  };
  require(cfg.rollout_length >= 1, "rollout_length must be at least 1");
  require(cfg.epochs >= 1, "epochs must be at least 1");
  require(cfg.minibatches >= 1, "minibatches must be at least 1");
  require(cfg.gamma > 0.0 && cfg.gamma <= 1.0, "gamma must lie in (0, 1]");
  require(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(cfg.clip_epsilon > 0.0, "clip_epsilon must be positive");
  require(cfg.entropy_coef >= 0.0, "entropy_coef must be non-negative");
  require(cfg.value_coef >= 0.0, "value_coef must be non-negative");
  require(cfg.max_grad_norm > 0.0, "max_grad_norm must be positive");
  require(cfg.learning_rate > 0.0, "learning_rate must be positive");
  require(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  require(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  require(cfg.adam_epsilon > 0.0, "adam_epsilon must be positive");
  require(cfg.hidden_units >= 1, "hidden_units must be at least 1");
  require((cfg.rollout_length * num_envs) % cfg.minibatches == 0,
          "rollout_length * num_envs must be divisible by minibatches");
}

RolloutBuffer::RolloutBuffer(std::size_t t, std::size_t n)
    : steps(t),
      envs(n),
      observations(t * n * kObsDim, 0.0),
      actions(t * n * kActDim, 0.0),
      log_probs(t * n, 0.0),
      rewards(t * n, 0.0),
      values(t * n, 0.0),
      terminated(t * n, 0),
      truncated(t * n, 0),
      bootstrap_values(t * n, 0.0),
      last_values(n, 0.0) {}

void compute_gae(RolloutBuffer& b, double gamma, double lambda) {
  b.advantages.assign(b.size(), 0.0);
  b.returns.assign(b.size(), 0.0);
  for (std::size_t n = 0; n < b.envs; ++n) {
    double next_advantage = 0.0;
    for (std::size_t t = b.steps; t-- > 0;) {
      const std::size_t i = b.index(t, n);
      const bool terminated = b.terminated[i] != 0;
      const bool done = terminated || b.truncated[i] != 0;
      double next_value;
      if (terminated) {
        next_value = 0.0;
      } else if (b.truncated[i] != 0) {
        next_value = b.bootstrap_values[i];
      } else if (t + 1 == b.steps) {
        next_value = b.last_values[n];
      } else {
        next_value = b.values[b.index(t + 1, n)];
      }
      const double delta = b.rewards[i] + gamma * next_value - b.values[i];
      const double advantage = delta + (done ? 0.0 : gamma * lambda * next_advantage);
      b.advantages[i] = advantage;
      b.returns[i] = advantage + b.values[i];
      next_advantage = advantage;
    }
  }
  b.has_advantages = true;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double std_dev = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (std_dev + 1e-8);
}

EpisodeTracker::EpisodeTracker(std::size_t num_envs, int hold_steps)
    : success_hold_steps(hold_steps),
      running_return(num_envs, 0.0),
      running_length(num_envs, 0),
      goal_streak(num_envs, 0),
      succeeded(num_envs, 0) {}

void EpisodeTracker::record(std::size_t env, double reward, bool goal_reached, bool done) {
  running_return[env] += reward;
  ++running_length[env];
  goal_streak[env] = goal_reached ? goal_streak[env] + 1 : 0;
  if (goal_streak[env] >= success_hold_steps) succeeded[env] = 1;
  if (!done) return;
  recent.push_back({running_return[env], running_length[env], succeeded[env] != 0});
  if (recent.size() > kWindow) recent.pop_front();
  ++completed;
  running_return[env] = 0.0;
  running_length[env] = 0;
  goal_streak[env] = 0;
  succeeded[env] = 0;
}

double EpisodeTracker::mean_return() const {
  if (recent.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : recent) s += e.episode_return;
  return s / static_cast<double>(recent.size());
}

double EpisodeTracker::mean_length() const {
  if (recent.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : recent) s += e.length;
  return s / static_cast<double>(recent.size());
}

double EpisodeTracker::success_rate() const {
  if (recent.empty()) return 0.0;
  std::size_t s = 0;
  for (const auto& e : recent) s += e.success ? 1 : 0;
  return static_cast<double>(s) / static_cast<double>(recent.size());
}

namespace {

EnvConfig with_seed(EnvConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

Matrix observation_matrix(const std::vector<Observation>& obs) {
  Matrix x(static_cast<Eigen::Index>(kObsDim), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t n = 0; n < obs.size(); ++n) {
    for (std::size_t k = 0; k < kObsDim; ++k) x(k, n) = obs[n][k];
  }
  return x;
}

}  // namespace

RolloutBuffer collect_rollout(VecEnv& env, std::vector<Observation>& obs, const MlpParams& policy,
                              const MlpParams& value_net, std::size_t steps, RandomSource& rng,
                              EpisodeTracker* tracker) {
  const std::size_t n_envs = env.num_envs();
  if (obs.size() != n_envs) throw std::invalid_argument("collect_rollout: observation count mismatch");
  RolloutBuffer buf(steps, n_envs);
  std::vector<Action> actions(n_envs);

  for (std::size_t t = 0; t < steps; ++t) {
    const Matrix x = observation_matrix(obs);
    const Matrix mean = mlp_forward(policy, x);
    const Matrix values = mlp_forward(value_net, x);
    const Matrix sampled = sample_action(mean, policy.log_std(), rng);
    const GaussianEval head = gaussian_head(mean, policy.log_std(), sampled);

    for (std::size_t n = 0; n < n_envs; ++n) {
      const std::size_t i = buf.index(t, n);
      std::copy(obs[n].begin(), obs[n].end(), buf.observations.begin() + i * kObsDim);
      for (std::size_t k = 0; k < kActDim; ++k) {
        actions[n][k] = sampled(k, n);
        buf.actions[i * kActDim + k] = sampled(k, n);
      }
      buf.log_probs[i] = head.log_prob(n);
      buf.values[i] = values(0, n);
    }

    const std::vector<StepResult> results = env.step_all(actions);

    std::vector<std::size_t> truncated_envs;
    for (std::size_t n = 0; n < n_envs; ++n) {
      const std::size_t i = buf.index(t, n);
      const StepResult& r = results[n];
      buf.rewards[i] = r.reward;
      buf.terminated[i] = r.terminated ? 1 : 0;
      buf.truncated[i] = r.truncated ? 1 : 0;
      if (r.truncated && !r.terminated) truncated_envs.push_back(n);
      if (tracker != nullptr) {
        tracker->record(n, r.reward, r.info.goal_reached, r.terminated || r.truncated);
      }
      obs[n] = r.observation;
    }
    if (!truncated_envs.empty()) {
      Matrix finals(static_cast<Eigen::Index>(kObsDim),
                    static_cast<Eigen::Index>(truncated_envs.size()));
      for (std::size_t j = 0; j < truncated_envs.size(); ++j) {
        const Observation& f = results[truncated_envs[j]].info.final_observation;
        for (std::size_t k = 0; k < kObsDim; ++k) finals(k, j) = f[k];
      }
      const Matrix boot = mlp_forward(value_net, finals);
      for (std::size_t j = 0; j < truncated_envs.size(); ++j) {
        buf.bootstrap_values[buf.index(t, truncated_envs[j])] = boot(0, j);
      }
    }
  }

  const Matrix last = mlp_forward(value_net, observation_matrix(obs));
  for (std::size_t n = 0; n < n_envs; ++n) buf.last_values[n] = last(0, n);
  return buf;
}

LossReport ppo_loss(const MlpParams& policy, const MlpParams& value_net, const Minibatch& batch,
                    const PpoConfig& cfg, Gradients* policy_grad, Gradients* value_grad) {
  const Eigen::Index m = batch.observations.cols();
  const double inv_m = 1.0 / static_cast<double>(m);
  const bool want_grad = policy_grad != nullptr || value_grad != nullptr;

  ForwardCache policy_cache;
  ForwardCache value_cache;
  const Matrix mean = mlp_forward(policy, batch.observations, want_grad ? &policy_cache : nullptr);
  const Matrix values = mlp_forward(value_net, batch.observations, want_grad ? &value_cache : nullptr);
  const auto log_std = policy.log_std();
  const GaussianEval head = gaussian_head(mean, log_std, batch.actions);

  LossReport report;
  Vector dloss_dlogp = Vector::Zero(m);
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;
  std::size_t clipped = 0;
  double surrogate_sum = 0.0;
  double kl_sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double log_ratio = head.log_prob(i) - batch.old_log_probs(i);
    const double ratio = std::exp(log_ratio);
    const double a = batch.advantages(i);
    const double unclipped = ratio * a;
    const double clipped_obj = std::clamp(ratio, lo, hi) * a;
    if (unclipped <= clipped_obj) {
      surrogate_sum += unclipped;
      dloss_dlogp(i) = -a * ratio * inv_m;
    } else {
      surrogate_sum += clipped_obj;
    }
    if (std::abs(ratio - 1.0) > cfg.clip_epsilon) ++clipped;
    kl_sum += (ratio - 1.0) - log_ratio;
  }
  report.policy = -surrogate_sum * inv_m;
  report.clip_fraction = static_cast<double>(clipped) * inv_m;
  report.approx_kl = kl_sum * inv_m;

  const Matrix value_err = values.row(0) - batch.returns.transpose();
  report.value = value_err.squaredNorm() * inv_m;
  report.entropy = head.entropy.mean();
  report.total = report.policy + cfg.value_coef * report.value - cfg.entropy_coef * report.entropy;

  if (policy_grad != nullptr) {
    Matrix grad_mean = gaussian_log_prob_grad_mean(mean, log_std, batch.actions);
    grad_mean = grad_mean.array().rowwise() * dloss_dlogp.transpose().array();
    *policy_grad = backward(policy, policy_cache, grad_mean);
    const Matrix dlogp_dlogstd = gaussian_log_prob_grad_log_std(mean, log_std, batch.actions);
    policy_grad->log_std() = dlogp_dlogstd * dloss_dlogp -
                             Vector::Constant(log_std.size(), cfg.entropy_coef);
  }
  if (value_grad != nullptr) {
    const Matrix grad_v = (2.0 * cfg.value_coef * inv_m) * value_err;
    *value_grad = backward(value_net, value_cache, grad_v);
  }
  return report;
}

double clip_grad_norm(Gradients& a, Gradients& b, double max_norm) {
  double sq = 0.0;
  for (double g : a.values()) sq += g * g;
  for (double g : b.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  const double coef = max_norm / (norm + 1e-6);
  if (coef < 1.0) {
    for (double& g : a.values()) g *= coef;
    for (double& g : b.values()) g *= coef;
  }
  return norm;
}

UpdateStats ppo_update(RolloutBuffer& buffer, MlpParams& policy, MlpParams& value_net,
                       AdamState& policy_adam, AdamState& value_adam, const PpoConfig& cfg,
                       RandomSource& rng) {
  if (!buffer.has_advantages) throw std::logic_error("ppo_update: compute_gae must run first");
  const std::size_t total = buffer.size();
  if (cfg.minibatches == 0 || total % cfg.minibatches != 0) {
    throw std::invalid_argument("ppo_update: batch not divisible into minibatches");
  }
  std::vector<double> advantages = buffer.advantages;
  if (cfg.advantage_normalization && total > 1) normalize_advantages(advantages);

  const std::size_t mb_size = total / cfg.minibatches;
  std::vector<std::size_t> order(total);
  UpdateStats stats;
  std::size_t updates = 0;

  Minibatch mb;
  mb.observations.resize(static_cast<Eigen::Index>(kObsDim), static_cast<Eigen::Index>(mb_size));
  mb.actions.resize(static_cast<Eigen::Index>(kActDim), static_cast<Eigen::Index>(mb_size));
  mb.old_log_probs.resize(static_cast<Eigen::Index>(mb_size));
  mb.advantages.resize(static_cast<Eigen::Index>(mb_size));
  mb.returns.resize(static_cast<Eigen::Index>(mb_size));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine);
    for (std::size_t start = 0; start < total; start += mb_size) {
      for (std::size_t j = 0; j < mb_size; ++j) {
        const std::size_t i = order[start + j];
        const auto col = static_cast<Eigen::Index>(j);
        for (std::size_t k = 0; k < kObsDim; ++k) {
          mb.observations(k, col) = buffer.observations[i * kObsDim + k];
        }
        for (std::size_t k = 0; k < kActDim; ++k) {
          mb.actions(k, col) = buffer.actions[i * kActDim + k];
        }
        mb.old_log_probs(col) = buffer.log_probs[i];
        mb.advantages(col) = advantages[i];
        mb.returns(col) = buffer.returns[i];
      }

      Gradients policy_grad;
      Gradients value_grad;
      const LossReport loss = ppo_loss(policy, value_net, mb, cfg, &policy_grad, &value_grad);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss at epoch " << epoch << " (policy " << loss.policy
            << ", value " << loss.value << ", entropy " << loss.entropy << ")";
        throw TrainingDivergence(msg.str());
      }
      clip_grad_norm(policy_grad, value_grad, cfg.max_grad_norm);
      adam_update(policy, policy_grad, policy_adam);
      adam_update(value_net, value_grad, value_adam);
      clamp_log_std(policy);

      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.clip_fraction += loss.clip_fraction;
      stats.approx_kl += loss.approx_kl;
      ++updates;
    }
  }
  const double inv = 1.0 / static_cast<double>(updates);
  stats.policy_loss *= inv;
  stats.value_loss *= inv;
  stats.entropy *= inv;
  stats.clip_fraction *= inv;
  stats.approx_kl *= inv;
  return stats;
}

PpoTrainer::PpoTrainer(EnvConfig env_cfg, PpoConfig ppo_cfg, std::uint64_t seed,
                       std::size_t num_threads)
    : ppo_cfg_(ppo_cfg),
      env_(with_seed(std::move(env_cfg), seed), num_threads),
      policy_(make_policy_params(kObsDim, kActDim, ppo_cfg.hidden_units)),
      value_(make_value_params(kObsDim, ppo_cfg.hidden_units)),
      rng_(mix64(seed ^ 0x5eedULL)),
      tracker_(env_.num_envs(), env_.config().success_hold_steps) {
  validate(ppo_cfg_, env_.num_envs());
  Rng init = make_stream(seed, 0x1417ULL);
  const double hidden_gain = std::sqrt(2.0);
  const double policy_gains[] = {hidden_gain, hidden_gain, 0.01};
  const double value_gains[] = {hidden_gain, hidden_gain, 1.0};
  init_orthogonal(policy_, policy_gains, init, ppo_cfg_.log_std_init);
  init_orthogonal(value_, value_gains, init);
  clamp_log_std(policy_);
  policy_adam_ = make_adam_state(policy_, ppo_cfg_.adam());
  value_adam_ = make_adam_state(value_, ppo_cfg_.adam());
  obs_ = env_.reset_all();
}

void PpoTrainer::restore(std::uint64_t iteration) {
  iteration_ = iteration;
  obs_.resize(env_.num_envs());
  for (std::size_t n = 0; n < env_.num_envs(); ++n) obs_[n] = env_.observation(n);
}

TrainMetrics PpoTrainer::iterate() {
  RolloutBuffer buffer =
      collect_rollout(env_, obs_, policy_, value_, ppo_cfg_.rollout_length, rng_, &tracker_);
  compute_gae(buffer, ppo_cfg_.gamma, ppo_cfg_.gae_lambda);
  const UpdateStats stats = ppo_update(buffer, policy_, value_, policy_adam_, value_adam_, ppo_cfg_, rng_);
  ++iteration_;

  TrainMetrics m;
  m.iteration = iteration_;
  m.env_steps = env_.env_steps();
  m.mean_episode_return = tracker_.mean_return();
  m.mean_episode_length = tracker_.mean_length();
  m.goal_reach_rate = tracker_.success_rate();
  m.mean_reward_per_step =
      std::accumulate(buffer.rewards.begin(), buffer.rewards.end(), 0.0) /
      static_cast<double>(buffer.size());
  m.episodes_completed = tracker_.completed;
  m.policy_loss = stats.policy_loss;
  m.value_loss = stats.value_loss;
  m.entropy = stats.entropy;
  m.clip_fraction = stats.clip_fraction;
  m.approx_kl = stats.approx_kl;
  return m;
}

}  // namespace quadnav
