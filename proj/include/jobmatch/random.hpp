#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace jobmatch {

// Seed mixing for deriving independent streams from (seed, index...) tuples.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Reproducible random source. The standard distributions are
// implementation-defined, so every draw here is built directly on the
// engine's 64 bit output, which the standard fixes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Uniform double in [0, 1).
  double uniform();
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace jobmatch
