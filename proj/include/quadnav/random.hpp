#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace quadnav {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, a, b), e.g. (seed, env index, episode).
inline Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return Rng(seed ^ mix64(mix64(a) ^ (b * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL)));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Engine plus standard-normal generator. Both carry state (the normal
// distribution caches one variate), so both are checkpointed.
struct RandomSource {
  Rng engine;
  std::normal_distribution<double> normal{0.0, 1.0};

  RandomSource() = default;
  explicit RandomSource(std::uint64_t seed) : engine(seed) {}

  double gaussian() { return normal(engine); }

  std::string save() const;
  void load(const std::string& text);
};

}  // namespace quadnav
