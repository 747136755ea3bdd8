#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hydroscen/calendar.hpp"
#include "hydroscen/ingest.hpp"
#include "hydroscen/netcore.hpp"
#include "hydroscen/probloss.hpp"
#include "hydroscen/scenario.hpp"

namespace hydroscen {

/// Band membership of one observation against four quantile curves
/// Q1 < Q2 < Q3 < Q4. Membership tests are strict; values sitting exactly on a
/// curve fall into one of the unreported gaps.
enum class Band { below_q1, lower_gap, mid, upper_gap, above_q4 };

Band classify_band(double observed, double q1, double q2, double q3, double q4);
const char* band_name(Band band);

struct BandCounts {
  int n = 0;
  int below_q1 = 0;
  int mid = 0;
  int above_q4 = 0;
};

/// Percentages for the (Q2, Q3), below-Q1 and above-Q4 bands.
struct BandFrequencies {
  double mid = 0.0;
  double below = 0.0;
  double above = 0.0;
};

BandFrequencies band_frequencies(const BandCounts& counts);
/// Nominal percentages implied by four levels: (q3 - q2, q1, 1 - q4) * 100.
BandFrequencies reference_frequencies(const QuantileSet& qs);

struct CoverageRow {
  std::string plant;
  BandCounts counts;
  BandFrequencies observed;
  double mean_discharge = 0.0;  // over the scored months
};

struct CoverageReport {
  std::string window_label;
  BandFrequencies reference;
  std::vector<CoverageRow> rows;

  /// `plant_id,window,n,ref_mid,obs_mid,ref_below_q1,obs_below_q1,ref_above_q4,obs_above_q4`
  std::string to_csv() const;
  /// One row per (plant, band) pairing mean discharge with observed frequency,
  /// the raw material for a discharge-vs-frequency density plot.
  /// `plant_id,window,mean_discharge,band,ref_pct,obs_pct`
  std::string pairs_csv() const;
};

/// Coverage of `observed` (month x plant) against four quantile curves.
CoverageReport coverage_from_curves(const Eigen::MatrixXd& observed, const std::vector<Eigen::MatrixXd>& curves,
                                    const std::vector<std::string>& plants, const QuantileSet& qs,
                                    std::string window_label = {});

/// Runs the model in eval mode from the first month of `forcing` (already
/// normalized) and scores the months of `window`.
CoverageReport coverage_table(const ModelParams& model, const ForcingSeries& forcing, const DischargeHistory& history,
                              IndexSpan window, const QuantileSet& qs, std::string window_label = {});

/// Megawatts per m^3/s for each plant.
struct ProductivityTable {
  std::map<std::string, double> factors;

  /// Factor per plant in `plants` order; DataError if one is missing.
  Eigen::VectorXd for_plants(const std::vector<std::string>& plants) const;
};

/// CSV with header `plant_id,productivity`; factors must be positive.
ProductivityTable load_productivity(const std::filesystem::path& path);
ProductivityTable productivity_from_csv(const std::string& text, const std::string& source = "<memory>");
/// Every plant weighted 1.
ProductivityTable unit_productivity(const std::vector<std::string>& plants);

/// energy(t) = sum_p rho_p * y(t, p) for a (month x plant) matrix.
Eigen::VectorXd monthly_energy(const Eigen::MatrixXd& values, const std::vector<std::string>& plants,
                               const ProductivityTable& productivity);

struct AnnualEnergy {
  int year = 0;
  int months = 0;
  double mean_energy = 0.0;
  double percent_of_baseline = 0.0;
};

/// Annual mean energy per calendar year, as a percentage of `baseline`.
std::vector<AnnualEnergy> inflow_energy(const Eigen::MatrixXd& values, const std::vector<YearMonth>& months,
                                        const std::vector<std::string>& plants,
                                        const ProductivityTable& productivity, double baseline);

/// Mean monthly energy of a history; the 100% reference.
double baseline_energy(const DischargeHistory& history, const ProductivityTable& productivity);

/// Per-year distribution of annual mean energy across all scenario paths.
struct ScenarioAnnualEnergy {
  int year = 0;
  std::vector<double> percent;  // one per (trajectory, scenario) path, sorted
  double median() const;
};

std::vector<ScenarioAnnualEnergy> scenario_inflow_energy(const ScenarioSet& scenarios,
                                                         const ProductivityTable& productivity, double baseline);

/// Linear-interpolation empirical quantile (Hyndman-Fan type 7).
double empirical_quantile(std::vector<double> values, double q);

/// Empirical quantile curves across every (trajectory, scenario) per month,
/// one (month x plant) matrix per level.
std::vector<Eigen::MatrixXd> scenario_quantile_curves(const ScenarioSet& scenarios, const QuantileSet& qs);

/// Historical per-calendar-month quantiles over `window`, laid out for `months`.
std::vector<Eigen::MatrixXd> climatology_curves(const DischargeHistory& history, IndexSpan window,
                                                const std::vector<YearMonth>& months, const QuantileSet& qs);

struct BandExportInput {
  std::vector<std::string> plants;
  std::vector<YearMonth> months;
  std::vector<Eigen::MatrixXd> curves;    // four (month x plant) curves
  std::optional<Eigen::MatrixXd> observed;
  /// Reference band from historical climatology: lowest and highest curve.
  std::optional<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> climatology;
};

/// Writes `band_<plant>.csv` and `band_<plant>.svg` per plant into `dir`.
/// CSV columns: year,month,q1,q2,q3,q4,observed,band[,clim_low,clim_high,clim_band].
/// Returns the written paths.
std::vector<std::filesystem::path> band_export(const BandExportInput& input, const std::filesystem::path& dir);

std::string band_csv(const BandExportInput& input, int plant);
std::string band_svg(const BandExportInput& input, int plant);

}  // namespace hydroscen
