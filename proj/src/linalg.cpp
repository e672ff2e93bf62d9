#include "dosegp/linalg.hpp"

#include <cmath>

#include "dosegp/errors.hpp"

namespace dosegp {

double CholResult::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

CholResult chol_with_jitter(Eigen::MatrixXd a, const std::string& context) {
  if (a.rows() != a.cols())
    throw InputError(context + ": matrix not square");
  if (!a.allFinite())
    throw NumericalError(context + ": non-finite matrix entries");
  const Eigen::Index n = a.rows();
  if (n == 0) throw InputError(context + ": empty matrix");
  a = 0.5 * (a + a.transpose()).eval();
  const double scale =
      std::max(1.0, a.diagonal().mean());

  CholResult out;
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success &&
      out.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
    return out;
  }
  for (double nug = 1e-10; nug <= 1.0000001e-6; nug *= 10.0) {
    Eigen::MatrixXd aj = a;
    aj.diagonal().array() += nug * scale;
    out.llt.compute(aj);
    if (out.llt.info() == Eigen::Success &&
        out.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      out.jitter = nug * scale;
      return out;
    }
  }
  throw NumericalError(context +
                       ": matrix not positive definite after jitter up to 1e-6");
}

Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const CholResult& chol,
                         RandomStream& rng) {
  Eigen::VectorXd eps(mean.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
  return mean + chol.llt.matrixL() * eps;
}

Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, Eigen::MatrixXd cov,
                         const std::string& context, RandomStream& rng) {
  return mvn_draw(mean, chol_with_jitter(std::move(cov), context), rng);
}

double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const CholResult& chol) {
  const Eigen::VectorXd d = x - mean;
  const double quad = d.dot(chol.solve(d));
  const double n = static_cast<double>(x.size());
  return -0.5 * (quad + chol.log_det() + n * std::log(2.0 * M_PI));
}

double normal_log_density(double x, double mean, double variance) {
  if (!(variance > 0.0))
    throw NumericalError("normal_log_density: variance must be positive");
  const double d = x - mean;
  return -0.5 * (d * d / variance + std::log(variance) +
                 std::log(2.0 * M_PI));
}

}  // namespace dosegp
