#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "dosegp/rng.hpp"

using namespace dosegp;

TEST_CASE("splitmix64 matches the reference sequence") {
  // First three outputs for seed 1234567, from the published algorithm.
  SplitMix64 g(1234567);
  CHECK(g() == 6457827717110365317ull);
  CHECK(g() == 3203168211198807973ull);
  CHECK(g() == 9817491932198370423ull);
}

TEST_CASE("streams with the same seed agree, different seeds differ") {
  RandomStream a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  bool any_diff = false;
  RandomStream a2(42);
  for (int i = 0; i < 100; ++i)
    if (a2.uniform() != c.uniform()) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("child streams are independent of parent consumption") {
  RandomStream parent(7);
  const std::uint64_t before = parent.child(3).next_u64();
  parent.uniform();
  parent.normal();
  CHECK(parent.child(3).next_u64() == before);
  // distinct ids give distinct streams
  std::set<std::uint64_t> firsts;
  for (std::uint64_t id = 0; id < 64; ++id)
    firsts.insert(parent.child(id).next_u64());
  CHECK(firsts.size() == 64);
}

TEST_CASE("normal moments and tail mass") {
  RandomStream rng(99);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  int beyond2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sumsq += v * v;
    if (std::abs(v) > 2.0) ++beyond2;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
  // P(|Z| > 2) = 0.04550026
  CHECK(std::abs(beyond2 / static_cast<double>(n) - 0.0455) < 0.004);
}

TEST_CASE("gamma moments") {
  RandomStream rng(5);
  for (double shape : {0.5, 1.0, 2.5, 10.0}) {
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = rng.gamma(shape);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(shape).epsilon(0.03));
    CHECK(var == doctest::Approx(shape).epsilon(0.08));
  }
}

TEST_CASE("inverse gamma mean matches scale/(shape-1)") {
  RandomStream rng(6);
  const double shape = 4.0, scale = 3.0;
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.inverse_gamma(shape, scale);
  CHECK(sum / n == doctest::Approx(scale / (shape - 1.0)).epsilon(0.02));
}

TEST_CASE("uniform_index has no obvious bias") {
  RandomStream rng(11);
  int counts[7] = {0};
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_index(7)];
  for (int k = 0; k < 7; ++k)
    CHECK(std::abs(counts[k] - n / 7) < 500);
}
