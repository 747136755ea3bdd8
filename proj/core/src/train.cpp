#include "hydroscen/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "hydroscen/errors.hpp"
#include "hydroscen/random.hpp"

namespace hydroscen {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be non-negative");
  if (max_epochs < 0) throw ConfigError("train: max_epochs must be non-negative");
  if (patience <= 0) throw ConfigError("train: patience must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("train: dropout_rate must lie in [0, 1)");
  if (train_years.empty() || valid_years.empty()) throw ConfigError("train: empty year window");
  if (train_years.overlaps(valid_years)) throw ConfigError("train: train and validation windows overlap");
  if (valid_years.first <= train_years.last) throw ConfigError("train: validation window must follow training");
  QuantileSet check(quantile_levels);
}

std::string TrainReport::to_csv() const {
  std::string out = "epoch,train_loss,valid_loss\n";
  for (const auto& e : epochs)
    out += std::to_string(e.epoch) + ',' + format_number(e.train_loss) + ',' + format_number(e.valid_loss) + '\n';
  return out;
}

namespace {

ModelInput input_range(const ModelInput& full, int begin, int end) {
  ModelInput in;
  in.months.assign(full.months.begin() + begin, full.months.begin() + end);
  in.precip = full.precip.middleRows(begin, end - begin);
  in.temp = full.temp.middleRows(begin, end - begin);
  return in;
}

double window_loss(const ModelParams& model, const ModelInput& full, const DischargeHistory& history, IndexSpan window,
                   const QuantileSet& qs) {
  if (window.empty()) throw DataError("evaluation window is empty");
  const auto pass = forward(model, input_range(full, 0, window.end));
  DistSeq d{pass.dist.mu.middleRows(window.begin, window.size()),
            pass.dist.sigma.middleRows(window.begin, window.size()),
            pass.dist.theta.middleRows(window.begin, window.size())};
  return pinball_loss(d, history.values.middleRows(window.begin, window.size()), qs).loss;
}

class Adam {
public:
  Adam(const ModelConfig& c, const TrainConfig& cfg)
      : m_(ModelParams::zeros(c)), v_(ModelParams::zeros(c)), cfg_(cfg) {}

  void step(ModelParams& params, const Gradients& grad) {
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, t_);
    const double c2 = 1.0 - std::pow(b2, t_);
    const double lr = cfg_.learning_rate, eps = cfg_.epsilon;
    ModelParams::zip(
        [&](const char*, auto& w, const auto& g, auto& m, auto& v) {
          m = b1 * m + (1.0 - b1) * g;
          v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
          w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        },
        params, grad, m_, v_);
  }

private:
  ModelParams m_, v_;
  const TrainConfig& cfg_;
  int t_ = 0;
};

std::string first_nonfinite(const ModelParams& p) {
  std::string name;
  p.for_each_tensor([&](const char* n, const auto& t) {
    if (name.empty() && !t.allFinite()) name = n;
  });
  return name;
}

}  // namespace

double evaluate_loss(const ModelParams& model, const ForcingSeries& forcing, const DischargeHistory& history,
                     IndexSpan window, const QuantileSet& qs) {
  check_aligned(forcing, history);
  if (window.begin < 0 || window.end > forcing.n_months()) throw DataError("evaluation window outside the data");
  return window_loss(model, make_model_input(forcing), history, window, qs);
}

double evaluate_loss(const ModelParams& model, const ForcingSeries& forcing, const DischargeHistory& history,
                     const YearRange& window, const QuantileSet& qs) {
  return evaluate_loss(model, forcing, history, window_span(forcing.months, window), qs);
}

void calibrate_head_biases(ModelParams& model, const DischargeHistory& history, IndexSpan window) {
  if (window.empty()) throw DataError("calibration window is empty");
  if (history.n_plants() != model.config.n_plants) throw DataError("history plant count does not match the model");
  for (int p = 0; p < history.n_plants(); ++p) {
    const Eigen::ArrayXd logs = history.values.col(p).segment(window.begin, window.size()).array().log();
    const double mean = logs.mean();
    const double sd = std::sqrt((logs - mean).square().mean());
    model.b_mu[p] = mean;
    model.b_sigma[p] = std::log(std::expm1(std::max(sd, 0.05)));
    model.b_theta[p] = 0.0;
  }
}

TrainResult train(ModelParams model, const ForcingSeries& forcing, const DischargeHistory& history,
                  const TrainConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  check_aligned(forcing, history);
  if (history.n_plants() != model.config.n_plants) throw DataError("history plant count does not match the model");
  const IndexSpan train_span = window_span(forcing.months, cfg.train_years);
  const IndexSpan valid_span = window_span(forcing.months, cfg.valid_years);
  if (train_span.empty()) throw DataError("training window holds no data");
  if (valid_span.empty()) throw DataError("validation window holds no data");

  const auto started = std::chrono::steady_clock::now();
  const QuantileSet qs(cfg.quantile_levels);
  const ModelInput full = make_model_input(forcing);
  const ModelInput train_in = input_range(full, train_span.begin, train_span.end);
  const Eigen::MatrixXd train_obs = history.values.middleRows(train_span.begin, train_span.size());

  // Unrolling always starts at month 0 of the data; training starts there too.
  const ModelInput warm_in = input_range(full, 0, train_span.begin);
  auto initial_state = [&](const ModelParams& p) -> std::optional<Eigen::VectorXd> {
    if (train_span.begin == 0) return std::nullopt;
    return forward(p, warm_in).h.col(warm_in.n_months());
  };

  TrainResult result;
  auto& report = result.report;
  auto record = [&](int epoch, double train_loss) {
    const double valid = window_loss(model, full, history, valid_span, qs);
    if (!std::isfinite(valid)) throw NumericFault("non-finite validation loss at epoch " + std::to_string(epoch));
    report.epochs.push_back({epoch, train_loss, valid});
    return valid;
  };

  double best = record(0, window_loss(model, full, history, train_span, qs));
  result.params = model;
  report.selected_epoch = 0;

  Adam adam(model.config, cfg);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    ForwardOptions opt;
    opt.mode = Mode::train;
    opt.dropout_rate = cfg.dropout_rate;
    opt.dropout_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    opt.h0 = initial_state(model);
    const ForwardPass pass = forward(model, train_in, opt);
    const PinballResult loss = pinball_loss(pass.dist, train_obs, qs);
    if (!std::isfinite(loss.loss)) throw NumericFault("non-finite training loss at epoch " + std::to_string(epoch));
    const Gradients grad = backward(model, pass, loss.grad);
    if (auto bad = first_nonfinite(grad); !bad.empty())
      throw NumericFault("non-finite gradient for '" + bad + "' at epoch " + std::to_string(epoch));

    adam.step(model, grad);
    project_nonneg(model);
    if (auto bad = first_nonfinite(model); !bad.empty())
      throw NumericFault("non-finite parameter '" + bad + "' at epoch " + std::to_string(epoch));
    if (observer) observer(epoch, model);

    const double valid = record(epoch, loss.loss);
    if (valid < best) {
      best = valid;
      result.params = model;
      report.selected_epoch = epoch;
    } else if (epoch - report.selected_epoch >= cfg.patience) {
      break;
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace hydroscen
