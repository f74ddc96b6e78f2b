#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "quadnav/env.hpp"

using namespace quadnav;
using testing::oracle_tanh;

namespace {

bool bit_equal(const RigidBodyState& a, const RigidBodyState& b) {
  return std::memcmp(&a, &b, sizeof(RigidBodyState)) == 0;
}

bool bit_equal(const Observation& a, const Observation& b) {
  return std::memcmp(a.data(), b.data(), sizeof(Observation)) == 0;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

bool inside(const Vec3& lo, const Vec3& hi, const Vec3& p) {
  return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
}

Action hover_action() { return {2.0 / 1.9 - 1.0, 0.0, 0.0, 0.0}; }

}  // namespace

TEST_CASE("default config is valid and rejects bad values") {
  EnvConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  CHECK(cfg.control_dt() == doctest::Approx(0.02));
  cfg.decimation = 0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.goal_box_max.z = 5.0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.w_lin_vel = 0.1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.w_goal = -1.0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("map_action examples") {
  const EnvConfig cfg;
  WrenchCommand w = map_action({-1, 0, 0, 0}, cfg);
  CHECK(w.thrust == 0.0);
  CHECK(w.torque == Vec3{0, 0, 0});

  w = map_action({1, 0, 0, 0}, cfg);
  CHECK(rel_err(w.thrust, 0.033 * 9.81 * 1.9) <= 1e-15);
  CHECK(w.thrust == doctest::Approx(0.61509).epsilon(1e-5));

  w = map_action(hover_action(), cfg);
  CHECK(rel_err(w.thrust, cfg.body.mass * cfg.body.gravity) <= 1e-14);

  w = map_action({0, 0.5, -0.25, 1.0}, cfg);
  CHECK(w.torque == Vec3{0.005, -0.0025, 0.01});
}

TEST_CASE("map_action clamps every input including infinities") {
  const EnvConfig cfg;
  const double inf = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 10000; ++i) {
    Action a{u(rng), u(rng), u(rng), u(rng)};
    if (i % 10 == 0) a[i % 4] = (i % 20 == 0) ? inf : -inf;
    Action c;
    for (std::size_t k = 0; k < kActDim; ++k) c[k] = std::clamp(a[k], -1.0, 1.0);
    const WrenchCommand w1 = map_action(a, cfg);
    const WrenchCommand w2 = map_action(c, cfg);
    REQUIRE(w1.thrust == w2.thrust);
    REQUIRE(w1.torque == w2.torque);
  }
}

TEST_CASE("build_observation examples") {
  RigidBodyState s;
  s.position = {0.5, 0.5, 1.0};
  s.lin_vel = {1, 0, 0};
  const Observation obs = build_observation(s, {0.5, 1.5, 1.0});
  const Observation want{1, 0, 0, 0, 0, 0, 0, 0, -1, 0, 1, 0};
  CHECK(obs == want);

  s.orientation = quat_from_axis_angle({0, 0, 1}, std::numbers::pi / 2);
  const Observation yawed = build_observation(s, s.position);
  CHECK(std::abs(yawed[0]) <= 1e-15);
  CHECK(std::abs(yawed[1] + 1.0) <= 1e-15);
  CHECK(std::abs(yawed[2]) <= 1e-15);
}

TEST_CASE("observation is invariant under a global yaw rotation") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    RigidBodyState s;
    s.position = {u(rng), u(rng), u(rng)};
    s.orientation = quat_normalize({n(rng), n(rng), n(rng), n(rng)});
    s.lin_vel = {u(rng), u(rng), u(rng)};
    s.ang_vel = {u(rng), u(rng), u(rng)};
    const Vec3 goal{u(rng), u(rng), u(rng)};
    const Quat yaw = quat_from_axis_angle({0, 0, 1}, u(rng));

    RigidBodyState r = s;
    r.position = rotate_body_to_world(yaw, s.position);
    r.orientation = quat_mul(yaw, s.orientation);
    r.lin_vel = rotate_body_to_world(yaw, s.lin_vel);
    const Observation a = build_observation(s, goal);
    const Observation b = build_observation(r, rotate_body_to_world(yaw, goal));
    for (std::size_t k = 0; k < kObsDim; ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    const double g = std::sqrt(a[6] * a[6] + a[7] * a[7] + a[8] * a[8]);
    REQUIRE(std::abs(g - 1.0) <= 1e-9);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("compute_reward examples against a tanh oracle") {
  const EnvConfig cfg;
  RigidBodyState s;
  s.position = {0.3, -0.4, 1.2};

  RewardResult r = compute_reward(s, s.position, cfg);
  CHECK(r.goal_reached);
  CHECK(rel_err(r.reward, 0.5) <= 1e-12);

  const Vec3 goal_08 = s.position + Vec3{0.8, 0.0, 0.0};
  r = compute_reward(s, goal_08, cfg);
  CHECK_FALSE(r.goal_reached);
  const double want_08 = 0.02 * 15.0 * (1.0 - oracle_tanh(1.0));
  CHECK(rel_err(r.reward, want_08) <= 1e-12);
  CHECK(r.reward == doctest::Approx(0.0715).epsilon(1e-3));

  s.lin_vel = {1, 0, 0};
  r = compute_reward(s, s.position + Vec3{0.0, 10.0, 0.0}, cfg);
  const double want_10 = 0.02 * (-0.05 * 1.0 + 15.0 * (1.0 - oracle_tanh(12.5)));
  CHECK(rel_err(r.reward, want_10) <= 1e-12);
  CHECK(r.components[kDistanceTerm] < 1e-10);
  CHECK(r.reward == doctest::Approx(-0.001).epsilon(1e-6));
}

TEST_CASE("reward components are consistent on random states") {
  const EnvConfig cfg;
  const double dt = cfg.control_dt();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  std::uniform_real_distribution<double> vel(-0.2, 0.2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    RigidBodyState s;
    s.position = {pos(rng), pos(rng), pos(rng)};
    s.lin_vel = {vel(rng), vel(rng), vel(rng)};
    s.ang_vel = {n(rng), n(rng), n(rng)};
    const double scale = (i % 3 == 0) ? 0.05 : 1.0;
    const Vec3 goal = s.position + Vec3{pos(rng), pos(rng), pos(rng)} * scale;
    const RewardResult r = compute_reward(s, goal, cfg);
    const double sum = r.components[0] + r.components[1] + r.components[2] + r.components[3];
    REQUIRE(std::abs(r.reward - sum) <= 1e-12);
    REQUIRE(r.components[kDistanceTerm] > 0.0);
    REQUIRE(r.components[kDistanceTerm] <= dt * cfg.w_distance);
    REQUIRE((r.components[kGoalTerm] == 0.0 || r.components[kGoalTerm] == dt * cfg.w_goal));
    if (r.goal_reached) REQUIRE(r.distance < cfg.goal_radius);
    REQUIRE(r.components[kLinVelTerm] <= 0.0);
    REQUIRE(r.components[kAngVelTerm] <= 0.0);
  }
}

TEST_CASE("shaping term decreases strictly with distance") {
  const EnvConfig cfg;
  RigidBodyState s;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 300; ++k) {
    const RewardResult r = compute_reward(s, {0.01 * k, 0.0, 0.0}, cfg);
    CHECK(r.components[kDistanceTerm] < prev);
    prev = r.components[kDistanceTerm];
  }
}

TEST_CASE("goal bonus dt scaling can be disabled") {
  EnvConfig cfg;
  cfg.scale_goal_bonus_by_dt = false;
  const RewardResult r = compute_reward({}, {0, 0, 0}, cfg);
  CHECK(r.components[kGoalTerm] == cfg.w_goal);
}

TEST_CASE("check_termination examples") {
  const EnvConfig cfg;
  RigidBodyState s;
  s.position = {0.0, 0.0, -0.01};
  Termination t = check_termination(s, 3, cfg);
  CHECK(t.terminated);
  CHECK_FALSE(t.truncated);

  s.position = {0.0, 0.0, 1.0};
  t = check_termination(s, 500, cfg);
  CHECK_FALSE(t.terminated);
  CHECK(t.truncated);

  t = check_termination(s, 250, cfg);
  CHECK_FALSE(t.terminated);
  CHECK_FALSE(t.truncated);

  s.lin_vel.x = std::numeric_limits<double>::quiet_NaN();
  CHECK(check_termination(s, 1, cfg).terminated);
}

TEST_CASE("resets are reproducible and respect the boxes") {
  EnvConfig cfg;
  cfg.num_envs = 4;
  cfg.seed = 9;
  VecEnv a(cfg);
  VecEnv b(cfg);
  const auto oa = a.reset_all();
  const auto ob = b.reset_all();
  for (std::size_t i = 0; i < cfg.num_envs; ++i) {
    CHECK(bit_equal(oa[i], ob[i]));
    CHECK(bit_equal(a.episodes()[i].body, b.episodes()[i].body));
  }

  for (int k = 0; k < 10000; ++k) {
    EpisodeState ep;
    Rng rng = make_stream(cfg.seed, 0, static_cast<std::uint64_t>(k));
    sample_episode(ep, cfg, rng);
    REQUIRE(inside(cfg.spawn_box_min, cfg.spawn_box_max, ep.body.position));
    REQUIRE(inside(cfg.goal_box_min, cfg.goal_box_max, ep.goal));
    REQUIRE(ep.body.lin_vel == Vec3{});
    REQUIRE(ep.body.ang_vel == Vec3{});
    REQUIRE(ep.body.orientation.x == 0.0);
    REQUIRE(ep.body.orientation.y == 0.0);
    const Observation obs = build_observation(ep.body, ep.goal);
    REQUIRE(std::abs(obs[6]) <= 1e-15);
    REQUIRE(std::abs(obs[7]) <= 1e-15);
    REQUIRE(std::abs(obs[8] + 1.0) <= 1e-15);
  }
}

TEST_CASE("one control step equals decimation physics steps with a held wrench") {
  EnvConfig cfg;
  cfg.num_envs = 1;
  VecEnv env(cfg);
  env.reset_all();
  const RigidBodyState start = env.episodes()[0].body;
  const Action a{0.3, 0.2, -0.1, 0.05};
  env.step_all(std::span<const Action>(&a, 1));

  const WrenchCommand w = map_action(a, cfg);
  RigidBodyState manual = step_rigid_body(start, w, cfg.body, cfg.physics_dt);
  manual = step_rigid_body(manual, w, cfg.body, cfg.physics_dt);
  CHECK(bit_equal(env.episodes()[0].body, manual));
  CHECK(env.env_steps() == 1);
}

TEST_CASE("zero action does not hover") {
  EnvConfig cfg;
  EpisodeState ep;
  ep.body.position = {0.0, 0.0, 1.0};
  cfg.decimation = 1;
  control_step(ep, {0, 0, 0, 0}, cfg);
  CHECK(rel_err(ep.body.lin_vel.z / cfg.physics_dt, 9.81 * (0.95 - 1.0)) <= 1e-12);
  CHECK(ep.body.lin_vel.z / cfg.physics_dt == doctest::Approx(-0.4905));
}

TEST_CASE("an env's trajectory does not depend on the other envs") {
  EnvConfig small;
  small.num_envs = 1;
  small.seed = 5;
  EnvConfig big = small;
  big.num_envs = 4096;
  VecEnv one(small);
  VecEnv many(big, 2);
  one.reset_all();
  many.reset_all();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Action> actions(big.num_envs);
  for (int step = 0; step < 60; ++step) {
    for (auto& a : actions) a = {u(rng), u(rng), u(rng), u(rng)};
    const auto r1 = one.step_all(std::span<const Action>(actions.data(), 1));
    const auto rn = many.step_all(actions);
    REQUIRE(bit_equal(r1[0].observation, rn[0].observation));
    REQUIRE(r1[0].reward == rn[0].reward);
    REQUIRE(bit_equal(one.episodes()[0].body, many.episodes()[0].body));
  }
  CHECK(many.env_steps() == 60 * 4096);
}

TEST_CASE("stepping is identical across thread counts") {
  EnvConfig cfg;
  cfg.num_envs = 64;
  cfg.seed = 11;
  VecEnv a(cfg, 1);
  VecEnv b(cfg, 4);
  a.reset_all();
  b.reset_all();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Action> actions(cfg.num_envs);
  for (int step = 0; step < 200; ++step) {
    for (auto& act : actions) act = {u(rng), u(rng), u(rng), u(rng)};
    const auto ra = a.step_all(actions);
    const auto rb = b.step_all(actions);
    for (std::size_t i = 0; i < cfg.num_envs; ++i) {
      REQUIRE(bit_equal(ra[i].observation, rb[i].observation));
      REQUIRE(ra[i].reward == rb[i].reward);
      REQUIRE(ra[i].terminated == rb[i].terminated);
    }
  }
}

TEST_CASE("auto-reset keeps the final reward and returns the fresh observation") {
  EnvConfig cfg;
  cfg.num_envs = 1;
  cfg.episode_length = 3;
  VecEnv env(cfg);
  env.reset_all();
  const Action a = hover_action();
  StepResult last;
  for (int k = 0; k < 3; ++k) last = env.step_all(std::span<const Action>(&a, 1))[0];
  CHECK(last.truncated);
  CHECK_FALSE(last.terminated);
  CHECK(env.episodes()[0].step_count == 0);
  CHECK(env.episodes()[0].episode_counter == 2);
  CHECK(bit_equal(last.observation, env.observation(0)));
  CHECK_FALSE(bit_equal(last.observation, last.info.final_observation));
  CHECK(last.reward > 0.0);
}

TEST_CASE("divergence reports the env index") {
  EnvConfig cfg;
  cfg.num_envs = 3;
  VecEnv env(cfg);
  env.reset_all();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Action> actions(3, hover_action());
  actions[2] = {nan, 0, 0, 0};
  try {
    env.step_all(actions);
    FAIL("expected a divergence");
  } catch (const SimulationDivergence& e) {
    CHECK(e.env_index() == 2);
  }
  std::vector<Action> wrong(2);
  CHECK_THROWS_AS(env.step_all(wrong), std::invalid_argument);
}
