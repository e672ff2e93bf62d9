#include "dosegp/kernel.hpp"

#include <cmath>

#include "dosegp/errors.hpp"

namespace dosegp {

namespace {
constexpr double kSqrt3 = 1.7320508075688772;

Eigen::MatrixXd apply_family(const KernelSpec& k, Eigen::MatrixXd sq) {
  if (k.family == KernelFamily::kMatern32Ard) {
    return k.signal_variance *
           (1.0 + kSqrt3 * sq.array().sqrt()) *
           (-kSqrt3 * sq.array().sqrt()).exp();
  }
  return k.signal_variance * (-0.5 * sq.array()).exp();
}
}  // namespace

void KernelSpec::validate(Eigen::Index expected_dim) const {
  if (lengthscales.size() < 1)
    throw InputError("kernel: needs at least one lengthscale");
  if (expected_dim >= 0 && lengthscales.size() != expected_dim)
    throw InputError("kernel: lengthscale count does not match input dim");
  if (!(lengthscales.array() > 0.0).all() || !lengthscales.allFinite())
    throw InputError("kernel: lengthscales must be positive and finite");
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw InputError("kernel: signal variance must be positive and finite");
}

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& v) {
  const double sq =
      ((u - v).array() / k.lengthscales.array()).square().sum();
  const double r = std::sqrt(sq);
  if (k.family == KernelFamily::kMatern32Ard)
    return k.signal_variance * (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
  return k.signal_variance * std::exp(-0.5 * sq);
}

Eigen::MatrixXd scaled_sqdist(const Eigen::VectorXd& lengthscales,
                              const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd as = a * lengthscales.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd bs = b * lengthscales.cwiseInverse().asDiagonal();
  const Eigen::VectorXd an = as.rowwise().squaredNorm();
  const Eigen::VectorXd bn = bs.rowwise().squaredNorm();
  Eigen::MatrixXd sq = -2.0 * as * bs.transpose();
  sq.colwise() += an;
  sq.rowwise() += bn.transpose();
  return sq.cwiseMax(0.0);
}

Eigen::MatrixXd kernel_gram(const KernelSpec& k, const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b) {
  k.validate(a.cols());
  return apply_family(k, scaled_sqdist(k.lengthscales, a, b));
}

Eigen::MatrixXd kernel_gram(const KernelSpec& k, const Eigen::MatrixXd& a) {
  k.validate(a.cols());
  Eigen::MatrixXd sq = scaled_sqdist(k.lengthscales, a, a);
  sq.diagonal().setZero();
  Eigen::MatrixXd g = apply_family(k, std::move(sq));
  // Round-trip through the distance expansion can break exact symmetry.
  return 0.5 * (g + g.transpose());
}

Eigen::MatrixXd lengthscale_grad_scale(const KernelSpec& k,
                                       const Eigen::MatrixXd& gram,
                                       const Eigen::MatrixXd& sqdist) {
  if (k.family == KernelFamily::kSquaredExponentialArd) return gram;
  return 3.0 * k.signal_variance *
         (-kSqrt3 * sqdist.array().sqrt()).exp().matrix();
}

}  // namespace dosegp
