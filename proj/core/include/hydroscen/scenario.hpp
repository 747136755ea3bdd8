#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hydroscen/assignment.hpp"
#include "hydroscen/checkpoint.hpp"
#include "hydroscen/ingest.hpp"
#include "hydroscen/netcore.hpp"

namespace hydroscen {

inline constexpr double kScenarioFloor = 1e-3;  // m^3/s

struct ScenarioProvenance {
  std::string checkpoint_id;
  std::string ensemble_id;
  std::uint64_t seed = 0;
  bool reordered = false;
  /// Draws that fell below kScenarioFloor and were clipped.
  long clipped = 0;
};

/// Discharge scenarios indexed (trajectory, scenario, month, plant).
class ScenarioSet {
public:
  ScenarioSet() = default;
  ScenarioSet(std::vector<int> traj_ids, int n_scen, std::vector<YearMonth> months, std::vector<std::string> plants);

  int n_traj() const { return static_cast<int>(traj_ids_.size()); }
  int n_scen() const { return n_scen_; }
  int horizon() const { return static_cast<int>(months_.size()); }
  int n_plants() const { return static_cast<int>(plants_.size()); }
  const std::vector<int>& traj_ids() const { return traj_ids_; }
  const std::vector<YearMonth>& months() const { return months_; }
  const std::vector<std::string>& plants() const { return plants_; }

  double& at(int traj, int scen, int month, int plant) { return values_[index(traj, scen, month, plant)]; }
  double at(int traj, int scen, int month, int plant) const { return values_[index(traj, scen, month, plant)]; }
  const std::vector<double>& values() const { return values_; }

  /// (scenario x plant) slice for one trajectory and month.
  Eigen::MatrixXd month_slice(int traj, int month) const;
  void set_month_slice(int traj, int month, const Eigen::MatrixXd& values);

  ScenarioProvenance provenance;

  bool operator==(const ScenarioSet& other) const;

private:
  std::size_t index(int traj, int scen, int month, int plant) const {
    return ((static_cast<std::size_t>(traj) * n_scen_ + scen) * months_.size() + month) * plants_.size() + plant;
  }

  std::vector<int> traj_ids_;
  int n_scen_ = 0;
  std::vector<YearMonth> months_;
  std::vector<std::string> plants_;
  std::vector<double> values_;
};

struct GenerateOptions {
  /// Hidden state when each trajectory starts (see warmup_state()); zeros when absent.
  std::optional<Eigen::VectorXd> h0;
  /// Worker threads over trajectories; results do not depend on it.
  int threads = 1;
};

struct GenerateResult {
  ScenarioSet scenarios;
  std::vector<HiddenSeq> hidden;  // per trajectory
  std::vector<DistSeq> dist;      // per trajectory
};

/// One eval-mode forward pass per trajectory, then independent shifted
/// log-normal draws per (scenario, month, plant), floored at kScenarioFloor.
/// The stream for (trajectory, scenario) is derived from (seed, trajectory id,
/// scenario index).
GenerateResult generate(const Checkpoint& model, const EnsembleSet& ensemble, int n_scen, std::uint64_t seed,
                        const GenerateOptions& options = {});

/// Hidden state after running the model over the months of `history_forcing`
/// that precede `start`; zeros when there are none.
Eigen::VectorXd warmup_state(const Checkpoint& model, const ForcingSeries& history_forcing, YearMonth start);

/// y(t) = intercept + phi_y y(t-1) + phi_h h(t-1) + eps, eps ~ N(0, theta).
struct SerialModel {
  Eigen::VectorXd intercept;  // plants
  Eigen::MatrixXd phi_y;      // plants x plants
  Eigen::MatrixXd phi_h;      // plants x hidden
  Eigen::MatrixXd theta;      // residual covariance, SPD
  Eigen::MatrixXd theta_inv;
  double shrinkage = 0.1;
  std::vector<std::string> warnings;

  Eigen::VectorXd predict(const Eigen::VectorXd& y_prev, const Eigen::VectorXd& h_prev) const;
};

struct SerialFitOptions {
  bool diagonal_phi = false;
  double shrinkage = 0.1;
};

inline constexpr int kMinSerialMonths = 24;

/// Least squares of y(t) on [1, y(t-1), h(t-1)] for t = 1..T-1, where row t
/// of `discharge` (month x plant) and `hidden` (month x hidden) are aligned.
SerialModel fit_serial_regression(const Eigen::MatrixXd& discharge, const Eigen::MatrixXd& hidden,
                                  const SerialFitOptions& options = {});

/// Runs the model in eval mode from the first month of `forcing` and fits the
/// regression over `window`. `forcing` must already be normalized.
SerialModel fit_serial_model(const ModelParams& model, const ForcingSeries& forcing, const DischargeHistory& history,
                             IndexSpan window, const SerialFitOptions& options = {});

/// cost(i, j) = d' theta_inv d with d = y_curr[j] - predict(y_prev[i], h_prev).
Eigen::MatrixXd mahalanobis_cost(const Eigen::MatrixXd& y_prev, const Eigen::VectorXd& h_prev,
                                 const Eigen::MatrixXd& y_curr, const SerialModel& sm);

/// Relabels month-t scenarios of each trajectory to continue month t-1 with
/// minimal total Mahalanobis cost, sweeping t = 1..H-1. Values at every
/// (trajectory, month) are only permuted.
ScenarioSet reorder(const ScenarioSet& scenarios, const std::vector<HiddenSeq>& hidden, const SerialModel& sm,
                    int threads = 1);

/// Mean over (trajectory, month pair, plant) of the Pearson correlation across
/// scenarios between months t-1 and t. Pairs with zero variance are skipped.
double mean_lag1_correlation(const ScenarioSet& scenarios);

std::string serial_model_to_json(const SerialModel& sm);
SerialModel serial_model_from_json(const std::string& text);

/// `trajectory,scenario,year,month,plant_id,discharge_m3s`
std::string scenarios_to_csv(const ScenarioSet& scenarios);
std::string provenance_to_json(const ScenarioSet& scenarios);
void save_scenarios(const ScenarioSet& scenarios, const std::filesystem::path& csv_path);
/// Inverse of scenarios_to_csv. Every (trajectory, scenario, month, plant)
/// must appear exactly once; provenance is left default.
ScenarioSet scenarios_from_csv(const std::string& text, const std::string& source = "<memory>");
/// Reads the CSV and, when present, the provenance sidecar next to it.
ScenarioSet load_scenarios(const std::filesystem::path& csv_path);

/// Content id of an ensemble (label, start, members and their forcing).
std::string ensemble_id(const EnsembleSet& ensemble);

}  // namespace hydroscen
