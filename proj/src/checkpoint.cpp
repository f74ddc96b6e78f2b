#include "quadnav/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <sstream>

#include "quadnav/io.hpp"

namespace quadnav {
namespace {

constexpr const char* kMagic = "quadnav checkpoint";
constexpr std::size_t kEnvStateWidth = 18;
constexpr std::size_t kTrackerWidth = 4;
constexpr std::size_t kRecentWidth = 3;

struct NamedArray {
  std::string name;
  std::vector<double> values;
};

void put_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out += static_cast<char>((bits >> (8 * i)) & 0xff);
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

std::vector<NamedArray> arrays_of(const Checkpoint& c) {
  std::vector<NamedArray> arrays;
  arrays.push_back({"policy", to_vector(c.policy.values())});
  arrays.push_back({"value", to_vector(c.value_net.values())});
  arrays.push_back({"policy_adam_m", c.policy_adam.first_moment});
  arrays.push_back({"policy_adam_v", c.policy_adam.second_moment});
  arrays.push_back({"value_adam_m", c.value_adam.first_moment});
  arrays.push_back({"value_adam_v", c.value_adam.second_moment});

  std::vector<double> env;
  for (const EpisodeState& e : c.episodes) {
    const RigidBodyState& b = e.body;
    for (double v : {b.position.x, b.position.y, b.position.z, b.orientation.w, b.orientation.x,
                     b.orientation.y, b.orientation.z, b.lin_vel.x, b.lin_vel.y, b.lin_vel.z,
                     b.ang_vel.x, b.ang_vel.y, b.ang_vel.z, e.goal.x, e.goal.y, e.goal.z,
                     static_cast<double>(e.step_count), static_cast<double>(e.episode_counter)}) {
      env.push_back(v);
    }
  }
  arrays.push_back({"env_state", env});

  const EpisodeTracker& t = c.tracker;
  std::vector<double> running;
  for (std::size_t n = 0; n < t.running_return.size(); ++n) {
    running.push_back(t.running_return[n]);
    running.push_back(t.running_length[n]);
    running.push_back(t.goal_streak[n]);
    running.push_back(t.succeeded[n]);
  }
  arrays.push_back({"tracker_running", running});
  std::vector<double> recent;
  for (const CompletedEpisode& e : t.recent) {
    recent.push_back(e.episode_return);
    recent.push_back(e.length);
    recent.push_back(e.success ? 1.0 : 0.0);
  }
  arrays.push_back({"tracker_recent", recent});
  arrays.push_back({"tracker_completed", {static_cast<double>(t.completed)}});
  return arrays;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckpointError("checkpoint: " + what);
}

}  // namespace

Checkpoint capture_checkpoint(const RunConfig& cfg, const PpoTrainer& trainer) {
  Checkpoint c;
  c.config = cfg;
  c.config_hash = training_config_hash(cfg);
  c.iteration = trainer.iteration();
  c.env_steps = trainer.env_steps();
  c.rng_state = trainer.rng().save();
  c.policy = trainer.policy();
  c.value_net = trainer.value_net();
  c.policy_adam = trainer.policy_adam();
  c.value_adam = trainer.value_adam();
  c.episodes = trainer.env().episodes();
  c.tracker = trainer.tracker();
  return c;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  const std::string config_text = render_config(c.config);
  const auto arrays = arrays_of(c);
  std::string out;
  out += std::string(kMagic) + "\n";
  out += "version " + std::to_string(c.version) + "\n";
  out += "config_hash " + hex(c.config_hash) + "\n";
  out += "iteration " + std::to_string(c.iteration) + "\n";
  out += "env_steps " + std::to_string(c.env_steps) + "\n";
  out += "policy_adam_step " + std::to_string(c.policy_adam.step) + "\n";
  out += "value_adam_step " + std::to_string(c.value_adam.step) + "\n";
  out += "rng " + c.rng_state + "\n";
  out += "config_bytes " + std::to_string(config_text.size()) + "\n";
  out += config_text;
  for (const auto& a : arrays) out += "array " + a.name + " " + std::to_string(a.values.size()) + "\n";
  out += "end_header\n";
  for (const auto& a : arrays) {
    for (double v : a.values) put_le(out, v);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t end = bytes.find('\n', pos);
    require(end != std::string::npos, "truncated header");
    std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    return line;
  };
  auto field = [&](const std::string& key) {
    const std::string line = next_line();
    require(line.rfind(key + " ", 0) == 0, "expected '" + key + "' in header");
    return line.substr(key.size() + 1);
  };
  auto as_u64 = [](const std::string& s, int base = 10) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(s, &used, base);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == s.size() && !s.empty(), "malformed number '" + s + "'");
    return v;
  };

  require(next_line() == kMagic, "not a quadnav checkpoint");
  Checkpoint c;
  c.version = static_cast<int>(as_u64(field("version")));
  require(c.version == kCheckpointVersion,
          "unsupported format version " + std::to_string(c.version) + " (expected " +
              std::to_string(kCheckpointVersion) + ")");
  c.config_hash = as_u64(field("config_hash"), 16);
  c.iteration = as_u64(field("iteration"));
  c.env_steps = as_u64(field("env_steps"));
  const std::uint64_t policy_step = as_u64(field("policy_adam_step"));
  const std::uint64_t value_step = as_u64(field("value_adam_step"));
  c.rng_state = field("rng");
  const std::uint64_t config_bytes = as_u64(field("config_bytes"));
  require(pos + config_bytes <= bytes.size(), "truncated config");
  try {
    c.config = parse_config(bytes.substr(pos, config_bytes));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint: embedded config: ") + e.what());
  }
  pos += config_bytes;
  require(training_config_hash(c.config) == c.config_hash, "config hash does not match header");

  std::vector<std::pair<std::string, std::size_t>> listing;
  for (std::string line = next_line(); line != "end_header"; line = next_line()) {
    std::istringstream ls(line);
    std::string tag, name;
    std::size_t count = 0;
    require(static_cast<bool>(ls >> tag >> name >> count) && tag == "array",
            "malformed array listing '" + line + "'");
    listing.emplace_back(name, count);
  }
  std::map<std::string, std::vector<double>> data;
  for (const auto& [name, count] : listing) {
    require(pos + 8 * count <= bytes.size(), "truncated array " + name);
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = get_le(bytes.data() + pos + 8 * i);
    pos += 8 * count;
    data[name] = std::move(v);
  }
  require(pos == bytes.size(), "trailing bytes after arrays");
  auto take = [&](const std::string& name) {
    auto it = data.find(name);
    require(it != data.end(), "missing array " + name);
    return it->second;
  };

  const RunConfig& cfg = c.config;
  c.policy = make_policy_params(kObsDim, kActDim, cfg.ppo.hidden_units);
  c.value_net = make_value_params(kObsDim, cfg.ppo.hidden_units);
  auto fill = [&](MlpParams& p, const std::string& name) {
    const auto v = take(name);
    require(v.size() == p.size(), "array " + name + " does not match the network shape");
    std::copy(v.begin(), v.end(), p.values().begin());
  };
  fill(c.policy, "policy");
  fill(c.value_net, "value");

  c.policy_adam = make_adam_state(c.policy, cfg.ppo.adam());
  c.value_adam = make_adam_state(c.value_net, cfg.ppo.adam());
  c.policy_adam.first_moment = take("policy_adam_m");
  c.policy_adam.second_moment = take("policy_adam_v");
  c.value_adam.first_moment = take("value_adam_m");
  c.value_adam.second_moment = take("value_adam_v");
  c.policy_adam.step = policy_step;
  c.value_adam.step = value_step;
  require(c.policy_adam.first_moment.size() == c.policy.size() &&
              c.policy_adam.second_moment.size() == c.policy.size() &&
              c.value_adam.first_moment.size() == c.value_net.size() &&
              c.value_adam.second_moment.size() == c.value_net.size(),
          "optimizer arrays do not match the network shape");

  const std::size_t n = cfg.env.num_envs;
  const auto env = take("env_state");
  require(env.size() == n * kEnvStateWidth, "env_state does not match num_envs");
  c.episodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* v = env.data() + i * kEnvStateWidth;
    EpisodeState& e = c.episodes[i];
    e.body.position = {v[0], v[1], v[2]};
    e.body.orientation = {v[3], v[4], v[5], v[6]};
    e.body.lin_vel = {v[7], v[8], v[9]};
    e.body.ang_vel = {v[10], v[11], v[12]};
    e.goal = {v[13], v[14], v[15]};
    e.step_count = static_cast<int>(v[16]);
    e.episode_counter = static_cast<std::uint64_t>(v[17]);
  }

  EpisodeTracker t(n, cfg.env.success_hold_steps);
  const auto running = take("tracker_running");
  require(running.size() == n * kTrackerWidth, "tracker_running does not match num_envs");
  for (std::size_t i = 0; i < n; ++i) {
    const double* v = running.data() + i * kTrackerWidth;
    t.running_return[i] = v[0];
    t.running_length[i] = static_cast<int>(v[1]);
    t.goal_streak[i] = static_cast<int>(v[2]);
    t.succeeded[i] = static_cast<std::uint8_t>(v[3]);
  }
  const auto recent = take("tracker_recent");
  require(recent.size() % kRecentWidth == 0 && recent.size() / kRecentWidth <= EpisodeTracker::kWindow,
          "malformed tracker_recent");
  for (std::size_t i = 0; i < recent.size(); i += kRecentWidth) {
    t.recent.push_back({recent[i], static_cast<int>(recent[i + 1]), recent[i + 2] != 0.0});
  }
  const auto completed = take("tracker_completed");
  require(completed.size() == 1, "malformed tracker_completed");
  t.completed = static_cast<std::uint64_t>(completed[0]);
  c.tracker = std::move(t);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error&) {
    throw CheckpointError("cannot read checkpoint: " + path.string());
  }
  return deserialize_checkpoint(bytes);
}

void restore_trainer(PpoTrainer& trainer, const Checkpoint& ckpt) {
  require(trainer.policy().same_layout(ckpt.policy) && trainer.value_net().same_layout(ckpt.value_net),
          "network shape differs from the trainer");
  require(trainer.env().num_envs() == ckpt.episodes.size(), "env count differs from the trainer");
  trainer.policy() = ckpt.policy;
  trainer.value_net() = ckpt.value_net;
  trainer.policy_adam() = ckpt.policy_adam;
  trainer.value_adam() = ckpt.value_adam;
  try {
    trainer.rng().load(ckpt.rng_state);
  } catch (const std::runtime_error& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  trainer.env().restore(ckpt.episodes, ckpt.env_steps);
  trainer.tracker() = ckpt.tracker;
  trainer.restore(ckpt.iteration);
}

}  // namespace quadnav
