#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace dc {

// Mixes a base seed with a stream id into an independent child seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// Seeded generator with platform-independent draws.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the standard.
// The std:: distributions are not, so every conversion to a real or bounded
// integer is done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform on [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);
  // Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Child generator for an independent stream; does not advance this one.
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// k distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k);

// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n);

}  // namespace dc
