#pragma once

#include <Eigen/Dense>

namespace dosegp {

enum class KernelFamily { kMatern32Ard, kSquaredExponentialArd };

// Stationary ARD kernel: r^2 = sum_d ((u_d - v_d)/l_d)^2, then
//   Matern-3/2:  s2 * (1 + sqrt(3) r) * exp(-sqrt(3) r)
//   SE:          s2 * exp(-r^2 / 2)
struct KernelSpec {
  KernelFamily family = KernelFamily::kMatern32Ard;
  Eigen::VectorXd lengthscales;   // one per input dimension, > 0
  double signal_variance = 1.0;   // > 0

  void validate(Eigen::Index expected_dim = -1) const;
};

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& v);

// Pairwise scaled squared distances between row sets, via the usual
// |a|^2 + |b|^2 - 2 a.b expansion (clamped at zero).
Eigen::MatrixXd scaled_sqdist(const Eigen::VectorXd& lengthscales,
                              const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

Eigen::MatrixXd kernel_gram(const KernelSpec& k, const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b);
// Symmetric case, exact zeros on the diagonal.
Eigen::MatrixXd kernel_gram(const KernelSpec& k, const Eigen::MatrixXd& a);

// Scale matrix c with dK(i,j)/d log l_d = c(i,j) * ((a_id - a_jd)/l_d)^2:
// 3 s2 exp(-sqrt(3) r) for Matern-3/2, K itself for SE.
Eigen::MatrixXd lengthscale_grad_scale(const KernelSpec& k,
                                       const Eigen::MatrixXd& gram,
                                       const Eigen::MatrixXd& sqdist);

}  // namespace dosegp
