#pragma once

#include <Eigen/Dense>
#include <vector>

namespace polymean {

// Least-squares slope of y against x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

// q-th quantile (0..1) by linear interpolation of the sorted values.
double quantile(std::vector<double> values, double q);

// Sample covariance (denominator m) of row vectors, centered at their mean.
Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& rows);

double frobenius_relative_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

// Upper tail of the chi-square distribution with k degrees of freedom.
double chi_square_sf(double x, double k);

// Upper tail of the standard normal.
double normal_sf(double z);

// Mardia multivariate normality statistics with asymptotic p-values:
// skewness  A = m*b1/6        ~ chi2 with D(D+1)(D+2)/6 dof
// kurtosis  Z = (b2 - D(D+2)) / sqrt(8 D (D+2) / m)  ~ N(0,1), two-sided
struct MardiaResult {
  double skewness = 0.0;        // b1
  double kurtosis = 0.0;        // b2
  double skewness_stat = 0.0;   // A
  double kurtosis_stat = 0.0;   // Z
  double skewness_p = 1.0;
  double kurtosis_p = 1.0;
};
MardiaResult mardia_test(const std::vector<Eigen::VectorXd>& rows);

}  // namespace polymean
