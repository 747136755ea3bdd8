#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hydroscen/ingest.hpp"

namespace hydroscen {

/// Synthetic basin with a known discharge law:
///
///   y(t, p) = base[month(t)] * (1 + sum_c weights(c, p) * P(c, t - lag)) * exp(s z - s^2 / 2)
///
/// with z ~ N(0, 1). Precipitation is seasonal, spatially correlated and
/// log-normal; temperature is a seasonal cycle plus Gaussian noise.
struct SynthSpec {
  GridShape grid{2, 2};
  int n_plants = 2;
  std::vector<std::string> plant_ids;  // defaults to P1..Pn
  YearMonth start{1981, 1};
  int n_months = 516;

  std::array<double, 12> base{};       // > 0, indexed by calendar month - 1
  Eigen::MatrixXd weights;             // (grid cells x plants), >= 0
  int lag = 1;                         // 0 or 1
  double noise = 0.25;                 // s > 0
  /// Lag-1 autocorrelation of the log noise, in [0, 1). Each month keeps the
  /// same marginal law, so GroundTruth is unaffected.
  double noise_persistence = 0.0;

  std::array<double, 12> precip_mean{};  // mm/month, >= 0
  double precip_cv = 0.5;
  double precip_spatial_corr = 0.7;      // in [0, 1]
  double precip_persistence = 0.5;       // AR(1) coefficient of the basin-wide anomaly, in [0, 1)
  std::array<double, 12> temp_mean{};
  double temp_sd = 1.0;

  std::vector<double> truth_levels{0.10, 0.25, 0.60, 0.95};

  struct Ensemble {
    int n_traj = 51;
    int horizon = 6;
    YearMonth start{2019, 9};
    std::string label = "synthetic";
  };
  std::optional<Ensemble> ensemble;

  /// Reasonable seasonal defaults for the given size.
  static SynthSpec defaults(GridShape grid, int n_plants, int n_months);
};

/// Exact quantiles of the generative law per (month, plant).
struct GroundTruth {
  std::vector<YearMonth> months;
  std::vector<std::string> plants;
  double noise = 0.0;
  Eigen::MatrixXd expected;  // deterministic part, equal to E[y]
  std::vector<double> levels;
  std::vector<Eigen::MatrixXd> quantiles;  // one (month x plant) per level

  /// exp(s * Phi^-1(q) - s^2 / 2) * expected(t, p)
  double quantile(int t, int p, double q) const;
};

struct SynthData {
  ForcingSeries forcing;
  DischargeHistory history;
  GroundTruth truth;
  std::optional<EnsembleSet> ensemble;
};

/// Throws ConfigError on non-positive base or noise, negative weights, bad lag.
void validate(const SynthSpec& spec);
SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed);

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);
std::string ground_truth_to_json(const GroundTruth& truth);

}  // namespace hydroscen
