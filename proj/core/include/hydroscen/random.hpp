#pragma once

#include <cstdint>
#include <random>

namespace hydroscen {

/// Seeded generator used everywhere randomness enters the pipeline.
/// Substreams are derived by hashing (seed, key...) so results never depend on
/// call order across independent work items.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic child seed for the work item identified by `keys`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace hydroscen
