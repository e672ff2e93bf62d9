#pragma once

#include <cstdint>

namespace dosegp {

// 64-bit finalizer used both as the SplitMix64 output function and for
// deriving child stream seeds.
std::uint64_t mix64(std::uint64_t z);

// SplitMix64. Tiny state, passes BigCrush, and the output sequence is a pure
// function of the seed, which is what makes stream splitting cheap.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ull; }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

// A seeded stream of variates plus deterministic splitting. child(id) gives a
// stream that depends only on (seed, id), so work parceled out to threads by
// index reproduces exactly regardless of scheduling.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  RandomStream child(std::uint64_t id) const;
  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double a, double b);     // [a, b)
  // Uniform over {0, .., n-1} by rejection, so no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();                        // Box-Muller, no cached spare
  double normal(double mean, double sd);
  double exponential();                   // unit rate
  double gamma(double shape);             // unit scale, Marsaglia-Tsang
  double inverse_gamma(double shape, double scale);

 private:
  std::uint64_t seed_;
  SplitMix64 engine_;
};

}  // namespace dosegp
