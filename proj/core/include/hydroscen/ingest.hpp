#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hydroscen/calendar.hpp"

namespace hydroscen {

struct GridShape {
  int rows = 0;
  int cols = 0;

  int cells() const { return rows * cols; }
  bool operator==(const GridShape&) const = default;
};

/// Monthly precipitation (mm/month) and temperature (degrees C) grids.
///
/// `precip` and `temp` are (month x cell) with cells flattened row-major
/// (index = row * cols + col). Cells outside `mask` hold 0 and are never fed
/// to the network.
struct ForcingSeries {
  std::vector<YearMonth> months;
  GridShape grid;
  Eigen::MatrixXd precip;
  Eigen::MatrixXd temp;
  std::vector<bool> mask;

  int n_months() const { return static_cast<int>(months.size()); }
  /// Flat indices of in-mask cells, ascending.
  std::vector<int> active_cells() const;
  /// Months [span.begin, span.end) as a new series.
  ForcingSeries slice(IndexSpan span) const;
};

/// Discharge (m^3/s) indexed (month, plant).
struct DischargeHistory {
  std::vector<std::string> plants;
  std::vector<YearMonth> months;
  Eigen::MatrixXd values;

  int n_months() const { return static_cast<int>(months.size()); }
  int n_plants() const { return static_cast<int>(plants.size()); }
  DischargeHistory slice(IndexSpan span) const;
};

/// Forcing trajectories of one seasonal ensemble issued at `start`.
struct EnsembleSet {
  std::vector<ForcingSeries> trajectories;
  /// Member number of each trajectory (traj_007.csv -> 7). Scenario random
  /// streams are keyed by this id, not by position.
  std::vector<int> ids;
  YearMonth start;
  int horizon = 0;
  std::string source_label;
};

/// Per-cell standardization statistics from the training window.
struct NormStats {
  GridShape grid;
  std::vector<bool> mask;
  Eigen::VectorXd precip_mean;
  Eigen::VectorXd precip_std;
  Eigen::VectorXd temp_mean;
  Eigen::VectorXd temp_std;
};

inline constexpr double kStdFloor = 1e-6;

// Throw DataError describing the first violated invariant.
void validate(const ForcingSeries& series);
void validate(const DischargeHistory& history);
void validate(const EnsembleSet& ensemble);
/// Months must match one-to-one.
void check_aligned(const ForcingSeries& forcing, const DischargeHistory& history);

ForcingSeries load_forcing(const std::filesystem::path& path);
void save_forcing(const ForcingSeries& series, const std::filesystem::path& path);
std::string forcing_to_csv(const ForcingSeries& series);
ForcingSeries forcing_from_csv(const std::string& text, const std::string& source = "<memory>");

DischargeHistory load_discharge(const std::filesystem::path& path);
void save_discharge(const DischargeHistory& history, const std::filesystem::path& path);
std::string discharge_to_csv(const DischargeHistory& history);
DischargeHistory discharge_from_csv(const std::string& text, const std::string& source = "<memory>");

/// Reads `manifest.json` plus every `traj_NNN.csv` in `dir`.
EnsembleSet load_ensemble(const std::filesystem::path& dir);
void save_ensemble(const EnsembleSet& ensemble, const std::filesystem::path& dir);

/// Statistics over the months in `span` only. Zero-variance cells get kStdFloor.
NormStats compute_norm_stats(const ForcingSeries& series, IndexSpan span);
NormStats compute_norm_stats(const ForcingSeries& series);

/// Temperature: (x - mean) / std. Precipitation: (x - mean) / std shifted so
/// that raw 0 mm maps to 0, i.e. x / std; standardized precipitation is
/// therefore >= 0 and a dry cell contributes nothing to the embedding.
ForcingSeries normalize(const ForcingSeries& series, const NormStats& stats);
ForcingSeries denormalize(const ForcingSeries& series, const NormStats& stats);

/// Fixed-width float formatting shared by every CSV writer (9 significant digits).
std::string format_number(double value);

}  // namespace hydroscen
