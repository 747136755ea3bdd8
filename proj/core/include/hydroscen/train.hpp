#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hydroscen/calendar.hpp"
#include "hydroscen/ingest.hpp"
#include "hydroscen/netcore.hpp"
#include "hydroscen/probloss.hpp"

namespace hydroscen {

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 2000;
  int patience = 50;
  double dropout_rate = 0.2;
  std::vector<double> quantile_levels{0.10, 0.25, 0.60, 0.95};
  YearRange train_years{1981, 2018};
  YearRange valid_years{2019, 2023};
  std::uint64_t seed = 0;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Validation must come strictly after training (out-of-sample).
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

/// Record 0 describes the initial parameters; record k the state after k steps.
struct TrainReport {
  std::vector<EpochRecord> epochs;
  int selected_epoch = 0;
  double wall_seconds = 0.0;

  /// `epoch,train_loss,valid_loss`
  std::string to_csv() const;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// Called after every optimizer step (post-projection) with the step number.
using StepObserver = std::function<void(int epoch, const ModelParams& params)>;

/// Full-sequence training with Adam, non-negativity projection after every
/// step, and early stopping on the validation window. `forcing` must already
/// be normalized. The returned parameters are the best-validation snapshot.
TrainResult train(ModelParams model, const ForcingSeries& forcing, const DischargeHistory& history,
                  const TrainConfig& config, const StepObserver& observer = {});

/// Eval-mode pinball loss over `window`. The network is unrolled from the
/// first month of `forcing` so the hidden state is warm when the window opens.
double evaluate_loss(const ModelParams& model, const ForcingSeries& forcing, const DischargeHistory& history,
                     IndexSpan window, const QuantileSet& qs);
double evaluate_loss(const ModelParams& model, const ForcingSeries& forcing, const DischargeHistory& history,
                     const YearRange& window, const QuantileSet& qs);

/// Data-driven starting point for the heads: b_mu = mean log discharge,
/// softplus(b_sigma) = std of log discharge, b_theta = 0, per plant.
void calibrate_head_biases(ModelParams& model, const DischargeHistory& history, IndexSpan window);

}  // namespace hydroscen
