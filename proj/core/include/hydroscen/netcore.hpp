#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hydroscen/calendar.hpp"
#include "hydroscen/ingest.hpp"
#include "hydroscen/probloss.hpp"

namespace hydroscen {

struct ModelConfig {
  int n_precip_cells = 0;
  int n_temp_cells = 0;
  int embedding_dim = 32;
  int hidden_dim = 64;
  int n_plants = 0;

  bool operator==(const ModelConfig&) const = default;
  /// Throws ConfigError when any size is not positive.
  void validate() const;
};

/// Every learnable tensor of the network.
///
/// Shapes (rows x cols): w_in_p (embedding x precip cells), w_in_t
/// (embedding x temp cells), w_z/w_r/w_h (hidden x embedding), u_z/u_r/u_h
/// (hidden x hidden), w_mu/w_sigma/w_theta (plants x hidden), biases (plants).
/// The GRU itself carries no bias terms. w_in_p must stay >= 0.
struct ModelParams {
  ModelConfig config;
  Eigen::MatrixXd w_in_p, w_in_t;
  Eigen::MatrixXd w_z, u_z, w_r, u_r, w_h, u_h;
  Eigen::MatrixXd w_mu, w_sigma, w_theta;
  Eigen::VectorXd b_mu, b_sigma, b_theta;

  /// Zero tensors with the shapes implied by `config`.
  static ModelParams zeros(const ModelConfig& config);

  /// Visits (name, tensor) for every tensor in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) { zip(f, *this); }
  template <typename F>
  void for_each_tensor(F&& f) const { zip(f, *this); }

  /// Calls f(name, a.tensor, b.tensor, ...) for every tensor, in lockstep.
  template <typename F, typename... Ps>
  static void zip(F&& f, Ps&... ps) {
    f("w_in_p", ps.w_in_p...); f("w_in_t", ps.w_in_t...);
    f("w_z", ps.w_z...); f("u_z", ps.u_z...); f("w_r", ps.w_r...); f("u_r", ps.u_r...);
    f("w_h", ps.w_h...); f("u_h", ps.u_h...);
    f("w_mu", ps.w_mu...); f("w_sigma", ps.w_sigma...); f("w_theta", ps.w_theta...);
    f("b_mu", ps.b_mu...); f("b_sigma", ps.b_sigma...); f("b_theta", ps.b_theta...);
  }

  bool all_finite() const;
  bool operator==(const ModelParams& other) const;
};

/// Gradients share the parameter layout.
using Gradients = ModelParams;

/// Network inputs for a run of months: (month x cell) for the in-mask cells.
struct ModelInput {
  std::vector<YearMonth> months;
  Eigen::MatrixXd precip;
  Eigen::MatrixXd temp;

  int n_months() const { return static_cast<int>(precip.rows()); }
};

/// Extracts in-mask cells from an already normalized series.
ModelInput make_model_input(const ForcingSeries& normalized);

/// Hidden states, one row per month.
struct HiddenSeq {
  Eigen::MatrixXd h;  // (month x hidden)
};

enum class Mode { train, eval };

struct ForwardOptions {
  Mode mode = Mode::eval;
  double dropout_rate = 0.0;
  /// Seeds the dropout masks; replaying the same seed reproduces them.
  std::uint64_t dropout_seed = 0;
  /// Initial hidden state; zeros when absent.
  std::optional<Eigen::VectorXd> h0;
};

inline constexpr double kSigmaFloor = 1e-4;

/// Output of forward() plus the intermediate values backward() needs.
/// Intermediates are stored one column per month.
struct ForwardPass {
  ModelConfig config;
  ForwardOptions options;
  DistSeq dist;
  HiddenSeq hidden;

  Eigen::MatrixXd x_p, x_t;     // (cells x months)
  Eigen::MatrixXd keep;         // dropout scale per embedding unit, (embedding x months)
  Eigen::MatrixXd emb;          // embedding after dropout
  Eigen::MatrixXd z, r, cand;   // gates and candidate state, (hidden x months)
  Eigen::MatrixXd h;            // (hidden x months + 1); column 0 is h0
  Eigen::MatrixXd sigma_pre;    // (plants x months)
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

/// w_in_p * precip + w_in_t * temp; no bias, so dry cold input embeds to zero.
Eigen::VectorXd embed(const ModelParams& params, const Eigen::VectorXd& precip, const Eigen::VectorXd& temp);

/// One GRU step without biases:
///   z = sigm(W_z e + U_z h), r = sigm(W_r e + U_r h),
///   c = tanh(W_h e + U_h (r .* h)), h' = (1 - z) .* h + z .* c.
Eigen::VectorXd gru_cell(const ModelParams& params, const Eigen::VectorXd& e, const Eigen::VectorXd& h_prev);

/// Unrolls the network over every month of `input`. Throws NumericFault
/// naming the first month with a non-finite value.
ForwardPass forward(const ModelParams& params, const ModelInput& input, const ForwardOptions& options = {});

/// Exact reverse-mode gradients of a scalar loss L through the full unrolled
/// sequence, given dL/d(mu, sigma, theta) for every month.
Gradients backward(const ModelParams& params, const ForwardPass& pass, const DistSeq& upstream);

/// Re-runs forward with `options` (replaying the dropout masks) then backward.
Gradients backward(const ModelParams& params, const ModelInput& input, const ForwardOptions& options,
                   const DistSeq& upstream);

/// Clamps every entry of w_in_p at zero; every other tensor is untouched.
void project_nonneg(ModelParams& params);
ModelParams project_nonneg(const ModelParams& params);

double softplus(double x);
double sigmoid(double x);

}  // namespace hydroscen
