#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace dosegp {

// Observational rows (y, x, z): outcome, continuous treatment, covariates.
struct ObservationalDataset {
  Eigen::VectorXd y;
  Eigen::VectorXd x;
  Eigen::MatrixXd z;                // n rows, p columns
  std::vector<int> stratum;         // optional, empty or size n

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return z.cols(); }
  void validate() const;            // finite, consistent sizes, n >= 1
  // Treatment and covariates side by side, n x (1+p); the GP input matrix.
  Eigen::MatrixXd inputs() const;
};

// Interventional rows (y, x): outcome under a set dose.
struct InterventionalDataset {
  Eigen::VectorXd y;
  Eigen::VectorXd x;

  Eigen::Index m() const { return y.size(); }
  void validate() const;
  void append(double dose, double outcome);
};

// Moments used to map a problem to standardized units and back. Outcomes are
// centered/scaled by the observational y, treatments by the observational x;
// covariates are left alone.
struct StandardizeMoments {
  double y_mean = 0.0, y_sd = 1.0;
  double x_mean = 0.0, x_sd = 1.0;

  double to_std_y(double v) const { return (v - y_mean) / y_sd; }
  double from_std_y(double v) const { return y_mean + y_sd * v; }
  double to_std_x(double v) const { return (v - x_mean) / x_sd; }
  double from_std_x(double v) const { return x_mean + x_sd * v; }
};

// CSV with header y,x,z1..zp and optionally a trailing stratum column.
ObservationalDataset read_observational_csv(const std::string& path);
void write_observational_csv(const std::string& path,
                             const ObservationalDataset& d);

// CSV with header y,x.
InterventionalDataset read_interventional_csv(const std::string& path);
void write_interventional_csv(const std::string& path,
                              const InterventionalDataset& d);

double sample_mean(const Eigen::VectorXd& v);
double sample_variance(const Eigen::VectorXd& v);  // unbiased, n >= 2

}  // namespace dosegp
