#include "motionseg/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace motionseg {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  // Mix seed and stream through two scrambler rounds so that nearby
  // (seed, stream) pairs land in unrelated parts of the state space.
  std::uint64_t s = seed;
  state_ = splitmix64(s) ^ (stream * 0xda942042e4dd58b5ULL);
  splitmix64(state_);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  // 53 top bits give a uniform double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int needs a positive range");
  // Modulo bias is below 2^-32 for any n that fits in an int.
  return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
}

double Rng::normal() {
  // Box-Muller, always consuming exactly two uniforms per call.
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

}  // namespace motionseg
