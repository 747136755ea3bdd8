#include "hydroscen/probloss.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hydroscen/errors.hpp"

namespace hydroscen {

DistSeq DistSeq::zeros(int months, int plants) {
  return DistSeq{Eigen::MatrixXd::Zero(months, plants), Eigen::MatrixXd::Zero(months, plants),
                 Eigen::MatrixXd::Zero(months, plants)};
}

QuantileSet::QuantileSet(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ConfigError("quantile set is empty");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!(levels_[i] > 0.0 && levels_[i] < 1.0))
      throw ConfigError("quantile level " + std::to_string(levels_[i]) + " outside (0, 1)");
    if (i > 0 && !(levels_[i] > levels_[i - 1])) throw ConfigError("quantile levels must be strictly increasing");
    z_.push_back(std_normal_quantile(levels_[i]));
  }
}

namespace {

// Giles (2010) single-precision approximation; used only as a starting point.
double erfinv_initial(double x) {
  double w = -std::log((1.0 - x) * (1.0 + x));
  double p;
  if (w < 5.0) {
    w -= 2.5;
    p = 2.81022636e-08;
    p = 3.43273939e-07 + p * w;
    p = -3.5233877e-06 + p * w;
    p = -4.39150654e-06 + p * w;
    p = 0.00021858087 + p * w;
    p = -0.00125372503 + p * w;
    p = -0.00417768164 + p * w;
    p = 0.246640727 + p * w;
    p = 1.50140941 + p * w;
  } else {
    w = std::sqrt(w) - 3.0;
    p = -0.000200214257;
    p = 0.000100950558 + p * w;
    p = 0.00134934322 + p * w;
    p = -0.00367342844 + p * w;
    p = 0.00573950773 + p * w;
    p = -0.0076224613 + p * w;
    p = 0.00943887047 + p * w;
    p = 1.00167406 + p * w;
    p = 2.83297682 + p * w;
  }
  return p * x;
}

}  // namespace

double erfinv(double x) {
  if (std::isnan(x) || !(std::fabs(x) < 1.0)) throw std::domain_error("erfinv: argument must satisfy |x| < 1");
  if (x == 0.0) return 0.0;
  const double ax = std::fabs(x);
  double y = erfinv_initial(ax);
  // Halley refinement. For ax > 0.5 the residual is taken on erfc so the tail
  // keeps relative precision (1 - ax is exact there).
  const double two_over_sqrt_pi = 2.0 / std::sqrt(std::numbers::pi);
  for (int iter = 0; iter < 3; ++iter) {
    double f = ax > 0.5 ? (1.0 - ax) - std::erfc(y) : std::erf(y) - ax;
    double fp = two_over_sqrt_pi * std::exp(-y * y);
    if (fp == 0.0) break;
    double ratio = f / fp;
    y -= ratio / (1.0 + y * ratio);
  }
  return x < 0.0 ? -y : y;
}

double std_normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("std_normal_quantile: q must lie in (0, 1)");
  if (q == 0.5) return 0.0;
  // Work in the lower tail: 1 - q is exact for q >= 0.5, and erfc keeps
  // relative precision there, which 2q - 1 near -1 does not.
  const double p = q < 0.5 ? q : 1.0 - q;
  double z = std::numbers::sqrt2 * erfinv(2.0 * p - 1.0);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  if (pdf > 0.0) z -= (0.5 * std::erfc(-z / std::numbers::sqrt2) - p) / pdf;
  return q < 0.5 ? z : -z;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double ln3_quantile(double mu, double sigma, double theta, double q) {
  if (!(sigma > 0.0)) throw std::domain_error("ln3_quantile: sigma must be positive");
  return std::exp(mu + sigma * std_normal_quantile(q)) + theta;
}

double ln3_sample(double mu, double sigma, double theta, Rng& rng) {
  return std::exp(mu + sigma * rng.normal()) + theta;
}

double ln3_cdf(double mu, double sigma, double theta, double y) {
  if (!(sigma > 0.0)) throw std::domain_error("ln3_cdf: sigma must be positive");
  if (y <= theta) return 0.0;
  return std_normal_cdf((std::log(y - theta) - mu) / sigma);
}

PinballResult pinball_loss(const DistSeq& dist, const Eigen::MatrixXd& observed, const QuantileSet& qs) {
  const int months = dist.n_months();
  const int plants = dist.n_plants();
  if (observed.rows() != months || observed.cols() != plants || dist.sigma.rows() != months ||
      dist.sigma.cols() != plants || dist.theta.rows() != months || dist.theta.cols() != plants)
    throw DataError("pinball_loss: distribution and observations are not aligned");
  if (months == 0 || plants == 0) throw DataError("pinball_loss: empty window");

  PinballResult out;
  out.grad = DistSeq::zeros(months, plants);
  const double scale = 1.0 / (static_cast<double>(months) * plants);
  const auto& levels = qs.levels();
  const auto& z = qs.z_values();
  double total = 0.0;
  for (int p = 0; p < plants; ++p) {
    for (int t = 0; t < months; ++t) {
      const double mu = dist.mu(t, p);
      const double sigma = dist.sigma(t, p);
      if (!(sigma > 0.0)) throw DataError("pinball_loss: non-positive sigma");
      double g_mu = 0.0, g_sigma = 0.0, g_theta = 0.0;
      for (int k = 0; k < qs.size(); ++k) {
        const double e = std::exp(mu + sigma * z[k]);
        const double err = observed(t, p) - (e + dist.theta(t, p));
        total += pinball(levels[k], err);
        // d term / d y_q = -q for err > 0, 1 - q for err < 0, 0 at the kink.
        double d_yq = 0.0;
        if (err > 0.0)
          d_yq = -levels[k];
        else if (err < 0.0)
          d_yq = 1.0 - levels[k];
        g_mu += d_yq * e;
        g_sigma += d_yq * z[k] * e;
        g_theta += d_yq;
      }
      out.grad.mu(t, p) = g_mu * scale;
      out.grad.sigma(t, p) = g_sigma * scale;
      out.grad.theta(t, p) = g_theta * scale;
    }
  }
  out.loss = total * scale;
  return out;
}

std::vector<Eigen::MatrixXd> quantile_curves(const DistSeq& dist, const QuantileSet& qs) {
  std::vector<Eigen::MatrixXd> curves;
  for (double z : qs.z_values()) {
    Eigen::MatrixXd c = (dist.mu.array() + dist.sigma.array() * z).exp() + dist.theta.array();
    curves.push_back(std::move(c));
  }
  return curves;
}

}  // namespace hydroscen
