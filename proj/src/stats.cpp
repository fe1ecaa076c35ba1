#include "polymean/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polymean {

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("slope fit needs at least two matched points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) throw std::invalid_argument("covariance of an empty set");
  const Eigen::Index d = rows[0].size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& r : rows) mean += r;
  mean /= static_cast<double>(rows.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& r : rows) {
    const Eigen::VectorXd c = r - mean;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(rows.size());
  return cov;
}

double frobenius_relative_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  const double denom = truth.norm();
  if (denom == 0.0) return estimate.norm();
  return (estimate - truth).norm() / denom;
}

namespace {

// Regularized incomplete gamma functions (series / continued fraction).
double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    // series expansion
    double sum = 1.0 / a;
    double term = sum;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // continued fraction for Q, then P = 1 - Q
  double b = x + 1.0 - a;
  double c = 1e300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

}  // namespace

double chi_square_sf(double x, double k) {
  if (x <= 0.0) return 1.0;
  return 1.0 - gamma_p(k / 2.0, x / 2.0);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

MardiaResult mardia_test(const std::vector<Eigen::VectorXd>& rows) {
  MardiaResult out;
  const double m = static_cast<double>(rows.size());
  const Eigen::Index d = rows[0].size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& r : rows) mean += r;
  mean /= m;
  Eigen::MatrixXd cov = sample_covariance(rows);
  const Eigen::MatrixXd inv = cov.ldlt().solve(Eigen::MatrixXd::Identity(d, d));

  std::vector<Eigen::VectorXd> centered;
  centered.reserve(rows.size());
  for (const auto& r : rows) centered.push_back(r - mean);

  double b1 = 0.0;
  for (const auto& ci : centered) {
    const Eigen::VectorXd wi = inv * ci;
    for (const auto& cj : centered) {
      const double g = wi.dot(cj);
      b1 += g * g * g;
    }
  }
  b1 /= m * m;

  double b2 = 0.0;
  for (const auto& ci : centered) {
    const double g = ci.dot(inv * ci);
    b2 += g * g;
  }
  b2 /= m;

  const double dd = static_cast<double>(d);
  out.skewness = b1;
  out.kurtosis = b2;
  out.skewness_stat = m * b1 / 6.0;
  const double dof = dd * (dd + 1.0) * (dd + 2.0) / 6.0;
  out.skewness_p = chi_square_sf(out.skewness_stat, dof);
  out.kurtosis_stat = (b2 - dd * (dd + 2.0)) / std::sqrt(8.0 * dd * (dd + 2.0) / m);
  out.kurtosis_p = 2.0 * normal_sf(std::abs(out.kurtosis_stat));
  return out;
}

}  // namespace polymean
