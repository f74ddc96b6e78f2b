#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadnav/env.hpp"
#include "quadnav/eval.hpp"
#include "quadnav/ppo.hpp"

namespace quadnav {

struct EvalDefaults {
  std::size_t episodes = 256;
  std::uint64_t seed = 1;
  double thrust_noise_std = 0.0;
  Vec3 wind_force;  // N
  bool wind_random_direction = false;
  bool record_trajectories = false;

  PerturbationConfig perturbation() const;
  bool operator==(const EvalDefaults&) const = default;
};

struct RunConfig {
  EnvConfig env;
  PpoConfig ppo;
  EvalDefaults eval;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/quadnav";
  std::uint64_t checkpoint_interval = 50;  // iterations
  std::uint64_t log_interval = 10;         // iterations

  bool operator==(const RunConfig&) const = default;
};

// Raised for unreadable, malformed or invalid configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void validate(const RunConfig& cfg);

// YAML text. Floating-point values use the shortest exact decimal form, so
// parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& cfg);

// Starts from defaults; unknown keys and malformed values are ConfigErrors.
RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config(const std::string& path);

// Dotted key as in the file ("env.num_envs", "env.body.mass"); dashes are
// accepted in place of underscores. Vectors take "x,y,z".
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// All dotted keys, in file order.
std::vector<std::string> config_keys();

// FNV-1a over the parts of the config that define the learning problem
// (env, ppo except total_env_steps, seed). Resuming requires a match.
std::uint64_t training_config_hash(const RunConfig& cfg);

}  // namespace quadnav
