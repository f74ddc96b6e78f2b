#include "quadnav/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include "quadnav/io.hpp"

namespace quadnav {
namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;  // YAML scalar or flow sequence
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string to_text(double v) { return format_double(v); }
std::string to_text(int v) { return std::to_string(v); }
std::string to_text(std::size_t v) { return std::to_string(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(const Vec3& v) {
  return "[" + format_double(v.x) + ", " + format_double(v.y) + ", " + format_double(v.z) + "]";
}
std::string to_text(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* want) {
  throw ConfigError("config key " + key + ": expected " + want + ", got '" + text + "'");
}

template <class T>
T parse_integer(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    bad_value(key, text, std::is_signed_v<T> ? "an integer" : "a non-negative integer");
  }
  return v;
}

template <class T>
T from_text(const std::string& key, const std::string& raw);

template <>
double from_text<double>(const std::string& key, const std::string& raw) {
  try {
    return parse_double(trim(raw));
  } catch (const std::runtime_error&) {
    bad_value(key, raw, "a number");
  }
}
template <>
int from_text<int>(const std::string& key, const std::string& raw) {
  return parse_integer<int>(key, raw);
}
template <>
unsigned long from_text<unsigned long>(const std::string& key, const std::string& raw) {
  return parse_integer<unsigned long>(key, raw);
}
template <>
bool from_text<bool>(const std::string& key, const std::string& raw) {
  const std::string t = trim(raw);
  if (t == "true") return true;
  if (t == "false") return false;
  bad_value(key, raw, "true or false");
}
template <>
Vec3 from_text<Vec3>(const std::string& key, const std::string& raw) {
  std::string t = trim(raw);
  if (!t.empty() && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
  std::vector<double> v;
  std::istringstream in(t);
  std::string cell;
  while (std::getline(in, cell, ',')) v.push_back(from_text<double>(key, cell));
  if (v.size() != 3) bad_value(key, raw, "three comma-separated numbers");
  return {v[0], v[1], v[2]};
}
template <>
std::string from_text<std::string>(const std::string&, const std::string& raw) {
  return raw;
}

template <class Access>
Field field(std::string key, Access access) {
  using T = std::remove_cvref_t<decltype(access(std::declval<RunConfig&>()))>;
  Field f;
  f.key = key;
  f.get = [access](const RunConfig& c) { return to_text(access(const_cast<RunConfig&>(c))); };
  f.set = [access, key](RunConfig& c, const std::string& v) { access(c) = from_text<T>(key, v); };
  return f;
}

#define QN_FIELD(key, expr) field(key, [](RunConfig& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      QN_FIELD("seed", c.seed),
      QN_FIELD("out_dir", c.out_dir),
      QN_FIELD("checkpoint_interval", c.checkpoint_interval),
      QN_FIELD("log_interval", c.log_interval),

      QN_FIELD("env.num_envs", c.env.num_envs),
      QN_FIELD("env.physics_dt", c.env.physics_dt),
      QN_FIELD("env.decimation", c.env.decimation),
      QN_FIELD("env.episode_length", c.env.episode_length),
      QN_FIELD("env.workspace_min", c.env.workspace_min),
      QN_FIELD("env.workspace_max", c.env.workspace_max),
      QN_FIELD("env.goal_box_min", c.env.goal_box_min),
      QN_FIELD("env.goal_box_max", c.env.goal_box_max),
      QN_FIELD("env.spawn_box_min", c.env.spawn_box_min),
      QN_FIELD("env.spawn_box_max", c.env.spawn_box_max),
      QN_FIELD("env.thrust_to_weight", c.env.thrust_to_weight),
      QN_FIELD("env.moment_scale", c.env.moment_scale),
      QN_FIELD("env.w_lin_vel", c.env.w_lin_vel),
      QN_FIELD("env.w_ang_vel", c.env.w_ang_vel),
      QN_FIELD("env.w_distance", c.env.w_distance),
      QN_FIELD("env.w_goal", c.env.w_goal),
      QN_FIELD("env.distance_scale", c.env.distance_scale),
      QN_FIELD("env.goal_radius", c.env.goal_radius),
      QN_FIELD("env.goal_vel_threshold", c.env.goal_vel_threshold),
      QN_FIELD("env.scale_goal_bonus_by_dt", c.env.scale_goal_bonus_by_dt),
      QN_FIELD("env.success_hold_steps", c.env.success_hold_steps),
      QN_FIELD("env.body.mass", c.env.body.mass),
      QN_FIELD("env.body.inertia_diag", c.env.body.inertia_diag),
      QN_FIELD("env.body.gravity", c.env.body.gravity),

      QN_FIELD("ppo.rollout_length", c.ppo.rollout_length),
      QN_FIELD("ppo.epochs", c.ppo.epochs),
      QN_FIELD("ppo.minibatches", c.ppo.minibatches),
      QN_FIELD("ppo.clip_epsilon", c.ppo.clip_epsilon),
      QN_FIELD("ppo.gamma", c.ppo.gamma),
      QN_FIELD("ppo.gae_lambda", c.ppo.gae_lambda),
      QN_FIELD("ppo.entropy_coef", c.ppo.entropy_coef),
      QN_FIELD("ppo.value_coef", c.ppo.value_coef),
      QN_FIELD("ppo.max_grad_norm", c.ppo.max_grad_norm),
      QN_FIELD("ppo.total_env_steps", c.ppo.total_env_steps),
      QN_FIELD("ppo.advantage_normalization", c.ppo.advantage_normalization),
      QN_FIELD("ppo.learning_rate", c.ppo.learning_rate),
      QN_FIELD("ppo.adam_beta1", c.ppo.adam_beta1),
      QN_FIELD("ppo.adam_beta2", c.ppo.adam_beta2),
      QN_FIELD("ppo.adam_epsilon", c.ppo.adam_epsilon),
      QN_FIELD("ppo.hidden_units", c.ppo.hidden_units),
      QN_FIELD("ppo.log_std_init", c.ppo.log_std_init),

      QN_FIELD("eval.episodes", c.eval.episodes),
      QN_FIELD("eval.seed", c.eval.seed),
      QN_FIELD("eval.thrust_noise_std", c.eval.thrust_noise_std),
      QN_FIELD("eval.wind_force", c.eval.wind_force),
      QN_FIELD("eval.wind_random_direction", c.eval.wind_random_direction),
      QN_FIELD("eval.record_trajectories", c.eval.record_trajectories),
  };
  return table;
}

#undef QN_FIELD

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> parts;
  std::istringstream in(key);
  std::string p;
  while (std::getline(in, p, '.')) parts.push_back(p);
  return parts;
}

void flatten(const YAML::Node& node, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const std::string k = kv.first.as<std::string>();
      flatten(kv.second, prefix.empty() ? k : prefix + "." + k, out);
    }
  } else if (node.IsSequence()) {
    std::string joined;
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (!node[i].IsScalar()) throw ConfigError("config key " + prefix + ": nested sequence");
      if (i > 0) joined += ',';
      joined += node[i].Scalar();
    }
    out.emplace_back(prefix, joined);
  } else if (node.IsScalar()) {
    out.emplace_back(prefix, node.Scalar());
  } else if (node.IsNull()) {
    throw ConfigError("config key " + prefix + ": missing value");
  }
}

}  // namespace

PerturbationConfig EvalDefaults::perturbation() const {
  PerturbationConfig p;
  p.thrust_noise_std = thrust_noise_std;
  p.wind_force = wind_force;
  p.wind_mode = wind_random_direction ? WindMode::kRandomDirection : WindMode::kConstant;
  return p;
}

void validate(const RunConfig& cfg) {
  try {
    validate(cfg.env);
    validate(cfg.ppo, cfg.env.num_envs);
    validate(cfg.eval.perturbation());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.eval.episodes == 0) throw ConfigError("eval.episodes must be at least 1");
  if (cfg.checkpoint_interval == 0) throw ConfigError("checkpoint_interval must be at least 1");
  if (cfg.log_interval == 0) throw ConfigError("log_interval must be at least 1");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  std::vector<std::string> open;  // currently open sections
  for (const Field& f : fields()) {
    std::vector<std::string> parts = split_key(f.key);
    const std::string leaf = parts.back();
    parts.pop_back();
    std::size_t common = 0;
    while (common < open.size() && common < parts.size() && open[common] == parts[common]) {
      ++common;
    }
    open.resize(common);
    for (std::size_t i = common; i < parts.size(); ++i) {
      out += std::string(2 * i, ' ') + parts[i] + ":\n";
      open.push_back(parts[i]);
    }
    out += std::string(2 * parts.size(), ' ') + leaf + ": " + f.get(cfg) + "\n";
  }
  return out;
}

RunConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigError("config must be a mapping at the top level");
  std::vector<std::pair<std::string, std::string>> entries;
  try {
    flatten(root, "", entries);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [key, value] : entries) {
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError("unknown config key: " + key);
    f->set(cfg, value);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error&) {
    throw ConfigError("cannot read config file: " + path);
  }
  return parse_config(text);
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  std::string k = key;
  std::replace(k.begin(), k.end(), '-', '_');
  const Field* f = find_field(k);
  if (f == nullptr) throw ConfigError("unknown config key: " + key);
  f->set(cfg, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

std::uint64_t training_config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const Field& f : fields()) {
    const bool problem = f.key == "seed" || f.key.rfind("env.", 0) == 0 ||
                         (f.key.rfind("ppo.", 0) == 0 && f.key != "ppo.total_env_steps");
    if (!problem) continue;
    feed(f.key);
    feed("=");
    feed(f.get(cfg));
    feed("\n");
  }
  return h;
}

}  // namespace quadnav
