#pragma once

#include <Eigen/Dense>
#include <string>

#include "dosegp/rng.hpp"

namespace dosegp {

// Cholesky of a symmetric matrix with an escalating diagonal nugget:
// try as-is, then 1e-10 .. 1e-6 in decades (scaled by the mean diagonal when
// that exceeds one), then give up with NumericalError naming the context.
struct CholResult {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  double log_det() const;  // of the factored matrix
  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& b) const {
    return llt.solve(b.derived());
  }
};

CholResult chol_with_jitter(Eigen::MatrixXd a, const std::string& context);

// mean + L * eps with standard normal eps; consumes exactly dim normals.
Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const CholResult& chol,
                         RandomStream& rng);
Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, Eigen::MatrixXd cov,
                         const std::string& context, RandomStream& rng);

// log N(x; mean, cov) given the factored covariance.
double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const CholResult& chol);

double normal_log_density(double x, double mean, double variance);

}  // namespace dosegp
