#pragma once

#include <cstdint>
#include <random>

namespace cfarnet {

/// Seeded random source passed explicitly to every sampling routine.
///
/// `split(stream)` derives an independent child generator from the parent's
/// seed without advancing the parent, so shards of a Monte Carlo loop can be
/// seeded by their index and produce the same values whatever the thread
/// count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

  double uniform(double lo, double hi);
  double normal();
  bool bernoulli(double p);
  std::size_t index(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cfarnet
