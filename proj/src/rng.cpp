#include "dosegp/rng.hpp"

#include <cmath>

#include "dosegp/errors.hpp"

namespace dosegp {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

RandomStream RandomStream::child(std::uint64_t id) const {
  // Feed the (seed, id) pair through the finalizer twice so child seeds of
  // nearby ids land far apart.
  return RandomStream(mix64(mix64(seed_ ^ 0xd6e8feb86659fd93ull) + id));
}

std::uint64_t RandomStream::next_u64() { return engine_(); }

double RandomStream::uniform() {
  // 53-bit mantissa in [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double a, double b) {
  return a + (b - a) * uniform();
}

std::uint64_t RandomStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw InputError("uniform_index: n must be positive");
  const std::uint64_t limit = ~0ull - ~0ull % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

double RandomStream::normal() {
  // Basic Box-Muller without caching the second variate: draws consumed per
  // call are constant, which keeps interleaved consumers reproducible.
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * M_PI * u2);
}

double RandomStream::normal(double mean, double sd) {
  return mean + sd * normal();
}

double RandomStream::exponential() {
  double u;
  do {
    u = uniform();
  } while (u <= 0.0);
  return -std::log(u);
}

double RandomStream::gamma(double shape) {
  if (!(shape > 0.0)) throw InputError("gamma: shape must be positive");
  // Marsaglia-Tsang squeeze; boost the shape below 1 and rescale.
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

double RandomStream::inverse_gamma(double shape, double scale) {
  if (!(scale > 0.0)) throw InputError("inverse_gamma: scale must be positive");
  return scale / gamma(shape);
}

}  // namespace dosegp
