#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dosegp/errors.hpp"
#include "dosegp/kernel.hpp"
#include "dosegp/rng.hpp"

using namespace dosegp;

namespace {
KernelSpec unit_spec(KernelFamily family, Eigen::Index d) {
  KernelSpec k;
  k.family = family;
  k.lengthscales = Eigen::VectorXd::Ones(d);
  k.signal_variance = 1.0;
  return k;
}
}  // namespace

TEST_CASE("matern-3/2 at unit separation matches the frozen value") {
  // (1 + sqrt(3)) * exp(-sqrt(3)) computed independently at high precision.
  const KernelSpec k = unit_spec(KernelFamily::kMatern32Ard, 1);
  Eigen::VectorXd u(1), v(1);
  u << 0.0;
  v << 1.0;
  CHECK(kernel_eval(k, u, v) ==
        doctest::Approx(0.4833577245965076).epsilon(1e-14));
  CHECK(kernel_eval(k, u, u) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("squared exponential at unit separation") {
  const KernelSpec k = unit_spec(KernelFamily::kSquaredExponentialArd, 1);
  Eigen::VectorXd u(1), v(1);
  u << 0.0;
  v << 1.0;
  CHECK(kernel_eval(k, u, v) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("scaling and signal variance behave as parameters") {
  KernelSpec k = unit_spec(KernelFamily::kMatern32Ard, 1);
  Eigen::VectorXd u(1), v(1);
  u << 0.0;
  v << 2.0;
  k.lengthscales(0) = 2.0;  // doubling the lengthscale halves the distance
  Eigen::VectorXd v1(1);
  v1 << 1.0;
  KernelSpec k1 = unit_spec(KernelFamily::kMatern32Ard, 1);
  CHECK(kernel_eval(k, u, v) == doctest::Approx(kernel_eval(k1, u, v1)));
  const double base = kernel_eval(k, u, v);
  k.signal_variance = 3.0;
  CHECK(kernel_eval(k, u, v) == doctest::Approx(3.0 * base));
}

TEST_CASE("gram via the distance expansion matches direct evaluation") {
  RandomStream rng(31);
  for (KernelFamily family :
       {KernelFamily::kMatern32Ard, KernelFamily::kSquaredExponentialArd}) {
    KernelSpec k;
    k.family = family;
    k.lengthscales = Eigen::VectorXd(3);
    k.lengthscales << 0.7, 2.1, 0.3;
    k.signal_variance = 1.7;
    Eigen::MatrixXd a(12, 3), b(9, 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    const Eigen::MatrixXd g = kernel_gram(k, a, b);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j)
        CHECK(g(i, j) == doctest::Approx(kernel_eval(
                             k, a.row(i), b.row(j))).epsilon(1e-12));
    const Eigen::MatrixXd gs = kernel_gram(k, a);
    CHECK((gs - gs.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      CHECK(gs(i, i) == doctest::Approx(k.signal_variance).epsilon(1e-14));
  }
}

TEST_CASE("irrelevant dimensions do not affect the kernel") {
  KernelSpec k = unit_spec(KernelFamily::kMatern32Ard, 2);
  Eigen::VectorXd u(2), v(2);
  u << 0.3, 5.0;
  v << 1.1, 5.0;
  const double before = kernel_eval(k, u, v);
  k.lengthscales(1) = 17.0;
  CHECK(kernel_eval(k, u, v) == doctest::Approx(before).epsilon(1e-14));
}

TEST_CASE("lengthscale gradient scale matches finite differences") {
  RandomStream rng(77);
  for (KernelFamily family :
       {KernelFamily::kMatern32Ard, KernelFamily::kSquaredExponentialArd}) {
    KernelSpec k;
    k.family = family;
    k.lengthscales = Eigen::VectorXd(2);
    k.lengthscales << 0.9, 1.6;
    k.signal_variance = 2.2;
    Eigen::MatrixXd a(6, 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    const Eigen::MatrixXd sq = scaled_sqdist(k.lengthscales, a, a);
    const Eigen::MatrixXd gram = kernel_gram(k, a);
    const Eigen::MatrixXd scale = lengthscale_grad_scale(k, gram, sq);
    const double h = 1e-6;
    for (Eigen::Index d = 0; d < 2; ++d) {
      KernelSpec kp = k, km = k;
      kp.lengthscales(d) *= std::exp(h);
      km.lengthscales(d) *= std::exp(-h);
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.rows(); ++j) {
          if (i == j) continue;
          const double fd = (kernel_eval(kp, a.row(i), a.row(j)) -
                             kernel_eval(km, a.row(i), a.row(j))) /
                            (2.0 * h);
          const double diff = (a(i, d) - a(j, d)) / k.lengthscales(d);
          const double analytic = scale(i, j) * diff * diff;
          CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
        }
    }
  }
}

TEST_CASE("validation rejects bad specs") {
  KernelSpec k;
  k.lengthscales = Eigen::VectorXd::Ones(2);
  k.signal_variance = -1.0;
  CHECK_THROWS_AS(k.validate(), InputError);
  k.signal_variance = 1.0;
  k.lengthscales(0) = 0.0;
  CHECK_THROWS_AS(k.validate(), InputError);
  k.lengthscales(0) = 1.0;
  CHECK_THROWS_AS(k.validate(3), InputError);
  CHECK_NOTHROW(k.validate(2));
}
