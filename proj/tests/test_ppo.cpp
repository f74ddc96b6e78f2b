#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>

#include "bandit.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "quadnav/ppo.hpp"

using namespace quadnav;
using testing::brute_force_advantage;
using testing::random_buffer;

namespace {

PpoConfig small_ppo() {
  PpoConfig cfg;
  cfg.hidden_units = 16;
  return cfg;
}

EnvConfig small_env(std::size_t envs) {
  EnvConfig cfg;
  cfg.num_envs = envs;
  return cfg;
}

}  // namespace

TEST_CASE("gae hand example") {
  RolloutBuffer b(2, 1);
  b.rewards = {1.0, 1.0};
  b.values = {0.5, 0.4};
  b.last_values = {0.3};
  compute_gae(b, 0.99, 0.95);
  const double d0 = 1.0 + 0.99 * 0.4 - 0.5;
  const double d1 = 1.0 + 0.99 * 0.3 - 0.4;
  CHECK(std::abs(d0 - 0.896) <= 1e-15);
  CHECK(std::abs(d1 - 0.897) <= 1e-15);
  CHECK(std::abs(b.advantages[1] - 0.897) <= 1e-15);
  CHECK(std::abs(b.advantages[0] - (0.896 + 0.9405 * 0.897)) <= 1e-15);
  CHECK(std::abs(b.returns[0] - (b.advantages[0] + 0.5)) <= 1e-15);
}

TEST_CASE("gae with lambda 0 is the one-step TD error") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    RolloutBuffer b = random_buffer(rng, 1 + trial % 100, 3, 0.1);
    compute_gae(b, 0.97, 0.0);
    for (std::size_t n = 0; n < b.envs; ++n) {
      for (std::size_t t = 0; t < b.steps; ++t) {
        REQUIRE(b.advantages[b.index(t, n)] == testing::td_residual(b, t, n, 0.97));
      }
    }
  }
}

TEST_CASE("gae with lambda 1 equals the brute-force discounted return") {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double done_prob = (trial % 4 == 0) ? 0.0 : 0.08;
    RolloutBuffer b = random_buffer(rng, 1 + trial % 100, 2, done_prob);
    compute_gae(b, 0.99, 1.0);
    for (std::size_t n = 0; n < b.envs; ++n) {
      for (std::size_t t = 0; t < b.steps; ++t) {
        worst = std::max(worst, std::abs(b.advantages[b.index(t, n)] - brute_force_advantage(b, t, n, 0.99)));
      }
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("truncation bootstraps while termination does not") {
  RolloutBuffer b(1, 2);
  b.rewards = {1.0, 1.0};
  b.terminated = {1, 0};
  b.truncated = {0, 1};
  b.bootstrap_values = {5.0, 5.0};
  b.last_values = {7.0, 7.0};
  compute_gae(b, 0.5, 0.9);
  CHECK(b.advantages[0] == 1.0);
  CHECK(b.advantages[1] == 1.0 + 0.5 * 5.0);
}

TEST_CASE("advantage normalization") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(3.0, 7.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> adv(2 + static_cast<std::size_t>(trial) * 13);
    for (double& a : adv) a = normal(rng);
    normalize_advantages(adv);
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(adv.size()));
    REQUIRE(std::abs(mean) <= 1e-9);
    REQUIRE(std::abs(sd - 1.0) <= 1e-6);
  }
}

TEST_CASE("identity update and clip arithmetic") {
  std::mt19937_64 rng(4);
  MlpParams policy({12, 6, 6, 4}, 4);
  MlpParams value({12, 6, 6, 1}, 0);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (double& v : policy.values()) v = normal(rng);
  for (double& v : value.values()) v = normal(rng);

  Minibatch mb;
  mb.observations = Matrix::Random(12, 10);
  const Matrix mean = mlp_forward(policy, mb.observations);
  mb.actions = mean + Matrix::Random(4, 10);
  mb.old_log_probs = gaussian_head(mean, policy.log_std(), mb.actions).log_prob;
  mb.advantages = Vector::Random(10);
  mb.returns = Vector::Random(10);
  const LossReport r = ppo_loss(policy, value, mb, PpoConfig{}, nullptr, nullptr);
  CHECK(std::abs(r.policy + mb.advantages.mean()) <= 1e-15);
  CHECK(r.clip_fraction == 0.0);
  CHECK(std::abs(r.approx_kl) <= 1e-15);

  Minibatch one;
  one.observations = mb.observations.leftCols(1);
  one.actions = mb.actions.leftCols(1);
  one.old_log_probs = mb.old_log_probs.head(1).array() - std::log(1.5);
  one.advantages = Vector::Ones(1);
  one.returns = Vector::Zero(1);
  const LossReport c = ppo_loss(policy, value, one, PpoConfig{}, nullptr, nullptr);
  CHECK(std::abs(c.policy + 1.2) <= 1e-12);
  CHECK(c.clip_fraction == 1.0);
}

TEST_CASE("every loss term's gradient matches finite differences") {
  std::mt19937_64 rng(5);
  for (auto term : {testing::LossTerm::kPolicy, testing::LossTerm::kValue,
                    testing::LossTerm::kEntropy, testing::LossTerm::kTotal}) {
    double worst = 0.0;
    double worst_loss = 0.0;
    double clipped = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto r = testing::check_ppo_term(term, rng, 1e-6);
      worst = std::max(worst, r.grads.worst_rel);
      worst_loss = std::max(worst_loss, r.loss_value_err);
      clipped += r.clip_fraction;
    }
    MESSAGE(std::string(testing::loss_term_name(term)) << ": worst guarded relative error " << worst
                                          << ", mean clip fraction " << clipped / 100);
    CHECK(worst <= 1e-6);
    CHECK(worst_loss <= 1e-12);
  }
}

TEST_CASE("full loss gradient on a collected T=4 N=2 buffer") {
  PpoTrainer trainer(small_env(2), [] {
    PpoConfig c = small_ppo();
    c.hidden_units = 6;
    c.rollout_length = 4;
    return c;
  }(), 3);
  std::vector<Observation> obs{trainer.env().observation(0), trainer.env().observation(1)};
  RandomSource rng(6);
  RolloutBuffer buf = collect_rollout(trainer.env(), obs, trainer.policy(), trainer.value_net(), 4, rng);
  compute_gae(buf, 0.99, 0.95);
  normalize_advantages(buf.advantages);

  Minibatch mb;
  mb.observations = Eigen::Map<const Matrix>(buf.observations.data(), 12, 8);
  mb.actions = Eigen::Map<const Matrix>(buf.actions.data(), 4, 8);
  mb.old_log_probs = Eigen::Map<const Vector>(buf.log_probs.data(), 8);
  mb.advantages = Eigen::Map<const Vector>(buf.advantages.data(), 8);
  mb.returns = Eigen::Map<const Vector>(buf.returns.data(), 8);
  // Move away from the collection point so the ratio is not identically one.
  std::mt19937_64 g(7);
  std::normal_distribution<double> normal(0.0, 0.05);
  MlpParams policy = trainer.policy();
  for (double& v : policy.values()) v += normal(g);
  MlpParams value = trainer.value_net();

  Gradients pg;
  Gradients vg;
  ppo_loss(policy, value, mb, PpoConfig{}, &pg, &vg);
  testing::RefNet rp(policy);
  testing::RefNet rv(value);
  auto loss = [&] { return testing::ref_ppo_loss(rp, rv, mb, PpoConfig{}).total; };
  const auto a = testing::grad_check(rp, pg.values(), loss, 1e-6L, 1e-6);
  const auto b = testing::grad_check(rv, vg.values(), loss, 1e-6L, 1e-6);
  CHECK(a.worst_rel <= 1e-6);
  CHECK(b.worst_rel <= 1e-6);
}

TEST_CASE("joint gradient clipping") {
  MlpParams a({2, 2}, 0);
  MlpParams b({2, 1}, 0);
  a.values()[0] = 3.0;
  b.values()[0] = 4.0;
  const double norm = clip_grad_norm(a, b, 1.0);
  CHECK(norm == 5.0);
  CHECK(std::abs(a.values()[0] - 3.0 / (5.0 + 1e-6)) <= 1e-15);
  CHECK(std::abs(b.values()[0] - 4.0 / (5.0 + 1e-6)) <= 1e-15);
  const double again = clip_grad_norm(a, b, 10.0);
  CHECK(again < 1.0);
  CHECK(std::abs(a.values()[0] - 3.0 / (5.0 + 1e-6)) <= 1e-15);
}

TEST_CASE("collect_rollout matches a manual step") {
  const EnvConfig env_cfg = small_env(1);
  VecEnv env(env_cfg);
  VecEnv manual(env_cfg);
  std::vector<Observation> obs = env.reset_all();
  const std::vector<Observation> start = manual.reset_all();

  Rng init(8);
  MlpParams policy = make_policy_params(12, 4, 16);
  MlpParams value = make_value_params(12, 16);
  const double gains[] = {std::sqrt(2.0), std::sqrt(2.0), 0.01};
  init_orthogonal(policy, gains, init, -1.0);
  init_orthogonal(value, gains, init);

  RandomSource r1(9);
  RandomSource r2(9);
  const RolloutBuffer buf = collect_rollout(env, obs, policy, value, 1, r1);
  CHECK(buf.size() == 1);
  CHECK(env.env_steps() == 1);

  Matrix x(12, 1);
  for (std::size_t k = 0; k < 12; ++k) x(k, 0) = start[0][k];
  const Matrix a = sample_action(mlp_forward(policy, x), policy.log_std(), r2);
  const Action act{a(0, 0), a(1, 0), a(2, 0), a(3, 0)};
  const StepResult step = manual.step_all(std::span<const Action>(&act, 1))[0];
  CHECK(buf.rewards[0] == step.reward);
  CHECK(std::memcmp(obs.data(), &step.observation, sizeof(Observation)) == 0);
}

TEST_CASE("rollouts account T*N steps and are reproducible with a near-deterministic policy") {
  const EnvConfig env_cfg = small_env(5);
  Rng init(10);
  MlpParams policy = make_policy_params(12, 4, 16);
  MlpParams value = make_value_params(12, 16);
  const double gains[] = {std::sqrt(2.0), std::sqrt(2.0), 0.5};
  init_orthogonal(policy, gains, init, -20.0);
  init_orthogonal(value, gains, init);

  auto run = [&] {
    VecEnv env(env_cfg);
    std::vector<Observation> obs = env.reset_all();
    RandomSource rng(11);
    RolloutBuffer b = collect_rollout(env, obs, policy, value, 7, rng);
    CHECK(env.env_steps() == 35);
    return b;
  };
  const RolloutBuffer a = run();
  const RolloutBuffer b = run();
  CHECK(a.observations == b.observations);
  CHECK(a.actions == b.actions);
  CHECK(a.log_probs == b.log_probs);
  CHECK(a.rewards == b.rewards);
  CHECK(a.values == b.values);
  CHECK(a.last_values == b.last_values);
}

TEST_CASE("truncated envs store the critic value of their final observation") {
  EnvConfig env_cfg = small_env(3);
  env_cfg.episode_length = 4;
  PpoConfig ppo = small_ppo();
  ppo.rollout_length = 6;
  ppo.minibatches = 2;
  PpoTrainer trainer(env_cfg, ppo, 12);
  std::vector<Observation> obs{trainer.env().observation(0), trainer.env().observation(1),
                               trainer.env().observation(2)};
  RandomSource rng(13);
  const RolloutBuffer buf = collect_rollout(trainer.env(), obs, trainer.policy(), trainer.value_net(), 6, rng);
  int truncations = 0;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    if (buf.truncated[i] && !buf.terminated[i]) {
      ++truncations;
      CHECK(buf.bootstrap_values[i] != 0.0);
    } else {
      CHECK(buf.bootstrap_values[i] == 0.0);
    }
  }
  CHECK(truncations > 0);
}

TEST_CASE("update statistics stay in range") {
  PpoTrainer trainer(small_env(8), small_ppo(), 14);
  for (int i = 0; i < 5; ++i) {
    const TrainMetrics m = trainer.iterate();
    CHECK(m.clip_fraction >= 0.0);
    CHECK(m.clip_fraction <= 1.0);
    CHECK(m.goal_reach_rate >= 0.0);
    CHECK(m.goal_reach_rate <= 1.0);
    const double floor = 4 * 0.5 * (1.0 + std::log(2.0 * std::numbers::pi)) + 4 * kLogStdMin;
    CHECK(m.entropy >= floor);
    for (double v : trainer.policy().values()) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("smoke run and determinism") {
  auto run = [](std::size_t threads) {
    PpoTrainer trainer(small_env(8), PpoConfig{}, 15, threads);
    std::vector<TrainMetrics> rows;
    for (int i = 0; i < 10; ++i) rows.push_back(trainer.iterate());
    return std::make_pair(rows, trainer.policy());
  };
  const auto [rows, policy] = run(1);
  REQUIRE(rows.size() == 10);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].iteration == i + 1);
    CHECK(rows[i].env_steps == (i + 1) * 32 * 8);
  }
  const auto [rows2, policy2] = run(1);
  const auto [rows3, policy3] = run(3);
  CHECK(policy == policy2);
  CHECK(policy == policy3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::memcmp(&rows[i], &rows2[i], offsetof(TrainMetrics, wall_clock_s)) == 0);
    CHECK(std::memcmp(&rows[i], &rows3[i], offsetof(TrainMetrics, wall_clock_s)) == 0);
  }
}

TEST_CASE("a non-finite loss aborts the update") {
  RolloutBuffer buf(1, 4);
  buf.terminated = {1, 1, 1, 1};
  buf.rewards = {1.0, 0.0, -1.0, 0.5};
  compute_gae(buf, 0.99, 0.95);
  PpoConfig cfg = small_ppo();
  cfg.minibatches = 1;
  MlpParams policy = make_policy_params(12, 4, 16);
  MlpParams value = make_value_params(12, 16);
  value.values()[0] = std::numeric_limits<double>::quiet_NaN();
  value.bias(0).setConstant(1.0);
  AdamState pa = make_adam_state(policy, cfg.adam());
  AdamState va = make_adam_state(value, cfg.adam());
  RandomSource rng(16);
  for (double& o : buf.observations) o = 1.0;
  CHECK_THROWS_AS(ppo_update(buf, policy, value, pa, va, cfg, rng), TrainingDivergence);

  RolloutBuffer fresh(1, 4);
  CHECK_THROWS_AS(ppo_update(fresh, policy, value, pa, va, cfg, rng), std::logic_error);
}

TEST_CASE("config validation") {
  PpoConfig cfg;
  CHECK_NOTHROW(validate(cfg, 4096));
  cfg.rollout_length = 33;
  CHECK_THROWS_AS(validate(cfg, 3), std::invalid_argument);
  cfg = {};
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(validate(cfg, 8), std::invalid_argument);
  cfg = {};
  cfg.gae_lambda = 1.5;
  CHECK_THROWS_AS(validate(cfg, 8), std::invalid_argument);
  cfg = {};
  cfg.clip_epsilon = 0.0;
  CHECK_THROWS_AS(validate(cfg, 8), std::invalid_argument);
}

TEST_CASE("episode tracker") {
  EpisodeTracker t(2, 2);
  CHECK(t.mean_return() == 0.0);
  t.record(0, 1.0, true, false);
  t.record(0, 1.0, true, false);
  t.record(0, 1.0, false, true);
  t.record(1, -1.0, true, true);
  CHECK(t.completed == 2);
  CHECK(t.mean_return() == 1.0);
  CHECK(t.mean_length() == 2.0);
  CHECK(t.success_rate() == 0.5);
}

TEST_CASE("ppo optimizes a one-step bandit") {
  const testing::BanditResult r = testing::run_bandit(17, 500, 0.05);
  MESSAGE("first iteration within 0.05: " << r.first_hit << ", final error " << r.final_error);
  CHECK(r.first_hit > 0);
  CHECK(r.final_error <= 0.05);
}
