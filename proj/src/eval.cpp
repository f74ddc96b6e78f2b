#include "quadnav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "quadnav/io.hpp"
#include "quadnav/parallel.hpp"
#include "quadnav/random.hpp"

namespace quadnav {
namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kWindStream = 2;

struct EpisodeOutcome {
  EpisodeSummary summary;
  Trajectory trajectory;
};

Vec3 episode_wind(const PerturbationConfig& p, std::uint64_t seed, std::size_t episode) {
  if (p.wind_mode == WindMode::kConstant) return p.wind_force;
  const double magnitude = p.wind_force.norm();
  Rng rng = make_stream(seed, episode, kWindStream);
  const double azimuth = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return {magnitude * std::cos(azimuth), magnitude * std::sin(azimuth), 0.0};
}

EpisodeOutcome run_episode(const EnvConfig& cfg, const PolicyFn& policy,
                           const PerturbationConfig& perturbation, std::uint64_t seed,
                           std::size_t index, bool record) {
  EpisodeState episode;
  {
    Rng rng = make_stream(seed, index, 0);
    sample_episode(episode, cfg, rng);
    episode.episode_counter = 1;
  }
  RandomSource noise;
  noise.engine = make_stream(seed, index, kNoiseStream);
  const Vec3 wind = episode_wind(perturbation, seed, index);

  EpisodeOutcome out;
  EpisodeSummary& s = out.summary;
  out.trajectory.goal = episode.goal;
  out.trajectory.wind = wind;

  const double dt = cfg.control_dt();
  const double d0 = (episode.body.position - episode.goal).norm();
  s.initial_distance = d0;
  Observation obs = build_observation(episode.body, episode.goal);
  int streak = 0;

  for (int step = 0; step < cfg.episode_length; ++step) {
    const Action action = policy(episode, obs);
    Disturbance disturbance;
    if (perturbation.thrust_noise_std > 0.0) {
      disturbance.thrust_scale = 1.0 + perturbation.thrust_noise_std * noise.gaussian();
    }
    disturbance.wind_world = wind;

    TrajectoryRow row;
    if (record) {
      row.step = step;
      row.time = step * dt;
      row.state = episode.body;
      row.action = action;
      row.distance = (episode.body.position - episode.goal).norm();
      row.normalized_distance = d0 > 0.0 ? row.distance / d0 : 0.0;
      row.thrust_scale = disturbance.thrust_scale;
    }

    const StepResult r = control_step(episode, action, cfg, disturbance);
    obs = r.observation;
    s.episode_return += r.reward;
    for (std::size_t c = 0; c < s.component_sums.size(); ++c) {
      s.component_sums[c] += r.info.components[c];
    }
    s.length = step + 1;
    s.final_distance = r.info.distance;

    streak = r.info.goal_reached ? streak + 1 : 0;
    if (!s.success && streak >= cfg.success_hold_steps) {
      s.success = true;
      s.time_to_goal = (step + 1 - streak + 1) * dt;
    }

    if (record) {
      row.components = r.info.components;
      row.reward = r.reward;
      row.goal_reached = r.info.goal_reached;
      out.trajectory.rows.push_back(row);
    }
    if (r.terminated) s.terminated = true;
    if (r.terminated || r.truncated) break;
  }

  s.normalized_final_distance = d0 > 0.0 ? s.final_distance / d0 : 0.0;
  s.final_offset = episode.body.position - episode.goal;
  const double wind_norm = wind.norm();
  if (wind_norm > 0.0) s.downwind_offset = dot(s.final_offset, wind * (1.0 / wind_norm));
  out.trajectory.final_state = episode.body;
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EvalReport aggregate(std::vector<EpisodeOutcome>& outcomes, bool record) {
  EvalReport report;
  report.episodes = outcomes.size();
  std::vector<double> final_distance, returns, success_norm, success_time, lateral, downwind;
  for (auto& o : outcomes) {
    const EpisodeSummary& s = o.summary;
    if (s.success) {
      ++report.successes;
      success_norm.push_back(s.normalized_final_distance);
      success_time.push_back(s.time_to_goal);
    }
    final_distance.push_back(s.final_distance);
    returns.push_back(s.episode_return);
    lateral.push_back(std::hypot(s.final_offset.x, s.final_offset.y));
    downwind.push_back(s.downwind_offset);
    for (std::size_t c = 0; c < s.component_sums.size(); ++c) {
      report.mean_component_returns[c] += s.component_sums[c];
    }
    report.mean_final_offset += s.final_offset;
    report.per_episode.push_back(s);
    if (record) report.trajectories.push_back(std::move(o.trajectory));
  }
  const double n = static_cast<double>(report.episodes);
  report.success_rate = static_cast<double>(report.successes) / n;
  report.mean_final_distance = mean_of(final_distance);
  report.median_final_distance = median_of(final_distance);
  report.mean_normalized_final_distance_success = mean_of(success_norm);
  report.mean_time_to_goal = mean_of(success_time);
  report.mean_episode_return = mean_of(returns);
  for (double& c : report.mean_component_returns) c /= n;
  report.mean_final_offset = report.mean_final_offset * (1.0 / n);
  report.mean_lateral_error = mean_of(lateral);
  report.mean_downwind_error = mean_of(downwind);
  return report;
}

const char* wind_mode_name(WindMode m) {
  return m == WindMode::kConstant ? "constant" : "random_direction";
}

void append_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out += ',';
    out += cells[i];
  }
  out += '\n';
}

const std::vector<std::string>& trajectory_header() {
  static const std::vector<std::string> header = {
      "step", "time", "pos_x", "pos_y", "pos_z", "quat_w", "quat_x", "quat_y", "quat_z",
      "vel_x", "vel_y", "vel_z", "ang_vel_x", "ang_vel_y", "ang_vel_z",
      "action_thrust", "action_roll", "action_pitch", "action_yaw",
      "goal_x", "goal_y", "goal_z", "wind_x", "wind_y", "wind_z", "thrust_scale",
      "reward_lin_vel", "reward_ang_vel", "reward_distance", "reward_goal", "reward",
      "distance", "normalized_distance", "goal_reached"};
  return header;
}

std::vector<std::string> state_cells(const RigidBodyState& s) {
  const auto f = format_double;
  return {f(s.position.x), f(s.position.y), f(s.position.z),
          f(s.orientation.w), f(s.orientation.x), f(s.orientation.y), f(s.orientation.z),
          f(s.lin_vel.x), f(s.lin_vel.y), f(s.lin_vel.z),
          f(s.ang_vel.x), f(s.ang_vel.y), f(s.ang_vel.z)};
}

RigidBodyState parse_state(const std::vector<double>& v, std::size_t at) {
  RigidBodyState s;
  s.position = {v[at], v[at + 1], v[at + 2]};
  s.orientation = {v[at + 3], v[at + 4], v[at + 5], v[at + 6]};
  s.lin_vel = {v[at + 7], v[at + 8], v[at + 9]};
  s.ang_vel = {v[at + 10], v[at + 11], v[at + 12]};
  return s;
}

std::vector<double> parse_numbers(const std::string& line) {
  std::vector<double> out;
  std::istringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(parse_double(cell));
  return out;
}

constexpr const char* kTrajectoryVersion = "# quadnav trajectory v1";
constexpr const char* kFinalStatePrefix = "# final_state ";

}  // namespace

void validate(const PerturbationConfig& p) {
  if (!(p.thrust_noise_std >= 0.0) || !std::isfinite(p.thrust_noise_std)) {
    throw std::invalid_argument("perturbation: thrust_noise_std must be finite and >= 0");
  }
  if (!p.wind_force.finite()) {
    throw std::invalid_argument("perturbation: wind_force must be finite");
  }
}

PolicyFn mean_policy(const MlpParams& policy) {
  if (policy.in_dim() != kObsDim || policy.out_dim() != kActDim) {
    throw std::invalid_argument("mean_policy: network shape does not match the task");
  }
  return [policy](EpisodeState&, const Observation& obs) {
    const Eigen::Map<const Matrix> x(obs.data(), kObsDim, 1);
    const Matrix mean = mlp_forward(policy, x);
    Action a;
    for (std::size_t i = 0; i < kActDim; ++i) a[i] = mean(i, 0);
    return a;
  };
}

EvalReport evaluate(const EnvConfig& env_cfg, const PolicyFn& policy, std::size_t n_episodes,
                    const PerturbationConfig& perturbation, std::uint64_t seed,
                    const EvalOptions& options) {
  validate(env_cfg);
  validate(perturbation);
  if (n_episodes == 0) throw std::invalid_argument("evaluate: n_episodes must be positive");

  std::vector<EpisodeOutcome> outcomes(n_episodes);
  ThreadPool pool(std::max<std::size_t>(1, options.num_threads));
  pool.parallel_for(n_episodes, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      try {
        outcomes[k] = run_episode(env_cfg, policy, perturbation, seed, k,
                                  options.record_trajectories);
      } catch (const SimulationDivergence& e) {
        throw SimulationDivergence(e.what(), e.state(), static_cast<long>(k), e.step());
      }
    }
  });
  return aggregate(outcomes, options.record_trajectories);
}

EvalReport evaluate(const EnvConfig& env_cfg, const MlpParams& policy, std::size_t n_episodes,
                    const PerturbationConfig& perturbation, std::uint64_t seed,
                    const EvalOptions& options) {
  return evaluate(env_cfg, mean_policy(policy), n_episodes, perturbation, seed, options);
}

std::vector<EvalReport> sweep_perturbations(const EnvConfig& env_cfg, const MlpParams& policy,
                                            const std::vector<PerturbationConfig>& grid,
                                            std::size_t n_episodes, std::uint64_t seed,
                                            const EvalOptions& options) {
  if (grid.empty()) throw std::invalid_argument("sweep_perturbations: grid is empty");
  for (const auto& p : grid) validate(p);
  const PolicyFn fn = mean_policy(policy);
  std::vector<EvalReport> reports;
  reports.reserve(grid.size());
  for (const auto& p : grid) reports.push_back(evaluate(env_cfg, fn, n_episodes, p, seed, options));
  return reports;
}

std::vector<Vec3> replay_trajectory(const Trajectory& trajectory, const EnvConfig& env_cfg) {
  std::vector<Vec3> positions;
  if (trajectory.rows.empty()) return positions;
  EpisodeState episode;
  episode.body = trajectory.rows.front().state;
  episode.goal = trajectory.goal;
  for (const TrajectoryRow& row : trajectory.rows) {
    Disturbance d;
    d.thrust_scale = row.thrust_scale;
    d.wind_world = trajectory.wind;
    control_step(episode, row.action, env_cfg, d);
    positions.push_back(episode.body.position);
  }
  return positions;
}

std::string eval_report_csv(const std::vector<PerturbationConfig>& perturbations,
                            const std::vector<EvalReport>& reports) {
  if (perturbations.size() != reports.size()) {
    throw std::invalid_argument("eval_report_csv: one perturbation per report required");
  }
  std::string out = "# quadnav eval report v1\n";
  append_row(out, {"thrust_noise_std", "wind_x", "wind_y", "wind_z", "wind_mode", "episodes",
                   "successes", "success_rate", "mean_final_distance", "median_final_distance",
                   "mean_normalized_final_distance_success", "mean_time_to_goal",
                   "mean_episode_return", "mean_return_lin_vel", "mean_return_ang_vel",
                   "mean_return_distance", "mean_return_goal", "mean_lateral_error",
                   "mean_downwind_error"});
  const auto f = format_double;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const PerturbationConfig& p = perturbations[i];
    const EvalReport& r = reports[i];
    append_row(out, {f(p.thrust_noise_std), f(p.wind_force.x), f(p.wind_force.y),
                     f(p.wind_force.z), wind_mode_name(p.wind_mode), std::to_string(r.episodes),
                     std::to_string(r.successes), f(r.success_rate), f(r.mean_final_distance),
                     f(r.median_final_distance), f(r.mean_normalized_final_distance_success),
                     f(r.mean_time_to_goal), f(r.mean_episode_return),
                     f(r.mean_component_returns[kLinVelTerm]),
                     f(r.mean_component_returns[kAngVelTerm]),
                     f(r.mean_component_returns[kDistanceTerm]),
                     f(r.mean_component_returns[kGoalTerm]), f(r.mean_lateral_error),
                     f(r.mean_downwind_error)});
  }
  return out;
}

std::string eval_summary_text(const PerturbationConfig& p, const EvalReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "episodes: " << r.episodes << "\n"
     << "perturbation: thrust_noise_std=" << p.thrust_noise_std << " wind=(" << p.wind_force.x
     << ", " << p.wind_force.y << ", " << p.wind_force.z << ") N mode=" << wind_mode_name(p.wind_mode)
     << "\n"
     << "success rate: " << r.success_rate << " (" << r.successes << "/" << r.episodes << ")\n"
     << "final distance: mean " << r.mean_final_distance << " m, median "
     << r.median_final_distance << " m\n"
     << "normalized final distance (successes): " << r.mean_normalized_final_distance_success
     << "\n"
     << "time to goal (successes): " << r.mean_time_to_goal << " s\n"
     << "episode return: " << r.mean_episode_return << "\n"
     << "reward components: lin_vel " << r.mean_component_returns[kLinVelTerm] << ", ang_vel "
     << r.mean_component_returns[kAngVelTerm] << ", distance "
     << r.mean_component_returns[kDistanceTerm] << ", goal "
     << r.mean_component_returns[kGoalTerm] << "\n"
     << "lateral error: " << r.mean_lateral_error << " m, downwind error "
     << r.mean_downwind_error << " m\n";
  return os.str();
}

std::string trajectory_csv(const Trajectory& t) {
  const auto f = format_double;
  std::string out = std::string(kTrajectoryVersion) + "\n";
  {
    std::string final_line = kFinalStatePrefix;
    const auto cells = state_cells(t.final_state);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) final_line += ',';
      final_line += cells[i];
    }
    out += final_line + "\n";
  }
  append_row(out, trajectory_header());
  for (const TrajectoryRow& row : t.rows) {
    std::vector<std::string> cells = {std::to_string(row.step), f(row.time)};
    for (auto& c : state_cells(row.state)) cells.push_back(std::move(c));
    for (double a : row.action) cells.push_back(f(a));
    for (double g : {t.goal.x, t.goal.y, t.goal.z, t.wind.x, t.wind.y, t.wind.z}) {
      cells.push_back(f(g));
    }
    cells.push_back(f(row.thrust_scale));
    for (double c : row.components) cells.push_back(f(c));
    cells.push_back(f(row.reward));
    cells.push_back(f(row.distance));
    cells.push_back(f(row.normalized_distance));
    cells.push_back(row.goal_reached ? "1" : "0");
    append_row(out, cells);
  }
  return out;
}

Trajectory parse_trajectory_csv(const std::string& text) {
  const CsvTable table = parse_csv(text);
  if (table.header != trajectory_header()) {
    for (const auto& name : trajectory_header()) {
      if (!table.column(name)) throw std::runtime_error("trajectory csv: missing column " + name);
    }
    throw std::runtime_error("trajectory csv: unexpected column order");
  }
  Trajectory t;
  for (const auto& c : table.comments) {
    if (c.rfind(kFinalStatePrefix, 0) == 0) {
      const auto v = parse_numbers(c.substr(std::string(kFinalStatePrefix).size()));
      if (v.size() != 13) throw std::runtime_error("trajectory csv: malformed final_state line");
      t.final_state = parse_state(v, 0);
    }
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<double> v(table.header.size());
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = table.number(r, c);
    TrajectoryRow row;
    row.step = static_cast<int>(v[0]);
    row.time = v[1];
    row.state = parse_state(v, 2);
    for (std::size_t i = 0; i < kActDim; ++i) row.action[i] = v[15 + i];
    if (r == 0) {
      t.goal = {v[19], v[20], v[21]};
      t.wind = {v[22], v[23], v[24]};
    }
    row.thrust_scale = v[25];
    for (std::size_t i = 0; i < 4; ++i) row.components[i] = v[26 + i];
    row.reward = v[30];
    row.distance = v[31];
    row.normalized_distance = v[32];
    row.goal_reached = v[33] != 0.0;
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace quadnav
