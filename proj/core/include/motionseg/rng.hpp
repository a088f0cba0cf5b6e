#pragma once

#include <cstdint>

namespace motionseg {

// Deterministic counter-based generator. Every (seed, stream) pair yields an
// independent sequence, so data order, augmentation draws, and weight init
// can be replayed individually without sharing mutable state.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int n);                // {0, ..., n-1}
  double normal();                       // standard normal, Box-Muller
  double normal(double mean, double stddev);

 private:
  std::uint64_t state_;
};

// Stream ids reserved by the rest of the library.
namespace rng_stream {
inline constexpr std::uint64_t kWeightInit = 1;
inline constexpr std::uint64_t kDataOrder = 2;
inline constexpr std::uint64_t kAugment = 3;
inline constexpr std::uint64_t kSceneGen = 4;
}  // namespace rng_stream

}  // namespace motionseg
