#pragma once

#include <vector>

#include <Eigen/Core>

#include "hydroscen/random.hpp"

namespace hydroscen {

/// Per-(month, plant) parameters of the shifted log-normal law
/// X = exp(mu + sigma * Z) + theta, Z ~ N(0, 1).
struct DistSeq {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd sigma;  // > 0
  Eigen::MatrixXd theta;

  int n_months() const { return static_cast<int>(mu.rows()); }
  int n_plants() const { return static_cast<int>(mu.cols()); }
  static DistSeq zeros(int months, int plants);
};

/// Monitored quantile levels with their standard-normal scores.
class QuantileSet {
public:
  /// Levels must lie in (0, 1) and be strictly increasing.
  explicit QuantileSet(std::vector<double> levels);
  static QuantileSet default_levels() { return QuantileSet({0.10, 0.25, 0.60, 0.95}); }

  const std::vector<double>& levels() const { return levels_; }
  const std::vector<double>& z_values() const { return z_; }
  int size() const { return static_cast<int>(levels_.size()); }

private:
  std::vector<double> levels_;
  std::vector<double> z_;
};

/// Inverse error function. Throws std::domain_error unless |x| < 1.
double erfinv(double x);
/// Phi^-1(q) = sqrt(2) * erfinv(2q - 1).
double std_normal_quantile(double q);
double std_normal_cdf(double z);

double ln3_quantile(double mu, double sigma, double theta, double q);
double ln3_sample(double mu, double sigma, double theta, Rng& rng);
/// P(X <= y); zero at or below theta.
double ln3_cdf(double mu, double sigma, double theta, double y);

/// One pinball term: max(q * err, (q - 1) * err).
inline double pinball(double q, double err) { return err >= 0.0 ? q * err : (q - 1.0) * err; }

struct PinballResult {
  double loss = 0.0;
  DistSeq grad;  // d loss / d (mu, sigma, theta)
};

/// Pinball loss of the predicted quantiles against `observed` (month x plant),
/// summed over levels and averaged over the month * plant terms.
/// err = observed - predicted quantile; subgradient 0 at err == 0.
PinballResult pinball_loss(const DistSeq& dist, const Eigen::MatrixXd& observed, const QuantileSet& qs);

/// Predicted quantile curves, one (month x plant) matrix per level.
std::vector<Eigen::MatrixXd> quantile_curves(const DistSeq& dist, const QuantileSet& qs);

}  // namespace hydroscen
