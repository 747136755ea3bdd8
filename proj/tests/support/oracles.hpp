#pragma once

// Independent reference implementations used only by tests. None of these
// share code with the library under test.

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace hydroscen::testing {

/// Standard normal CDF in extended precision.
long double normal_cdf_ld(long double z);

/// Phi^-1(q) by bisection on the extended-precision CDF; converges to the
/// last representable long double.
double normal_quantile_bisect(double q);

/// erfinv(x) by bisection on erf/erfc in extended precision.
double erfinv_bisect(double x);

/// Minimum total over all n! permutations, plus the first permutation (in
/// lexicographic order) that attains it.
struct BruteAssignment {
  double total;
  std::vector<int> perm;
};
BruteAssignment brute_force_assignment(const Eigen::MatrixXd& cost);

/// Direct double loop over (i, j) of d' * theta_inv * d with
/// d = y_curr[j] - (c + phi_y y_prev[i] + phi_h h).
Eigen::MatrixXd mahalanobis_loop(const Eigen::MatrixXd& y_prev, const Eigen::VectorXd& h, const Eigen::MatrixXd& y_curr,
                                 const Eigen::VectorXd& intercept, const Eigen::MatrixXd& phi_y,
                                 const Eigen::MatrixXd& phi_h, const Eigen::MatrixXd& theta_inv);

/// Central difference of f at x along every coordinate of `x`.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                   double eps);

/// Minimizer of sum_i pinball(q, y_i - c) over an evenly spaced grid of c
/// spanning the sample. On a flat optimum the smallest minimizing grid point
/// is returned.
struct GridMinimum {
  double argmin;
  double step;
};
GridMinimum pinball_grid_search(const std::vector<double>& sample, double q, int grid_points);

/// Inverse of the empirical CDF: order statistic ceil(n q), the smallest
/// minimizer of the pinball sum.
double inverse_ecdf(std::vector<double> sample, double q);

/// sup |F_n(x) - F(x)| for a sample against a continuous CDF.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Pearson correlation in long double.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace hydroscen::testing
