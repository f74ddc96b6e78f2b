#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadnav/config.hpp"
#include "quadnav/ppo.hpp"

namespace quadnav {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text header (one "key value" per line, then the embedded config and an
// array listing, closed by "end_header") followed by the listed arrays as
// little-endian IEEE-754 doubles, back to back, in listing order.
struct Checkpoint {
  int version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::uint64_t iteration = 0;
  std::uint64_t env_steps = 0;
  RunConfig config;
  std::string rng_state;
  MlpParams policy;
  MlpParams value_net;
  AdamState policy_adam;
  AdamState value_adam;
  std::vector<EpisodeState> episodes;
  EpisodeTracker tracker;
};

Checkpoint capture_checkpoint(const RunConfig& cfg, const PpoTrainer& trainer);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

// Atomic write; the parent directory is created when missing.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws CheckpointError for missing, truncated or version-mismatched files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies the learner state into a trainer built from ckpt.config. Throws
// CheckpointError when shapes disagree.
void restore_trainer(PpoTrainer& trainer, const Checkpoint& ckpt);

}  // namespace quadnav
