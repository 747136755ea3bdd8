#include <cmath>

#include <gtest/gtest.h>

#include "hydroscen/errors.hpp"
#include "hydroscen/synth.hpp"
#include "hydroscen/train.hpp"

using namespace hydroscen;

namespace {

// 1981-1990 synthetic record: train on 1981-1988, validate on 1989-1990.
struct Problem {
  ForcingSeries forcing;
  DischargeHistory history;
  TrainConfig cfg;
  ModelParams model;
};

Problem make_problem(std::uint64_t seed, int hidden = 6) {
  SynthSpec spec = SynthSpec::defaults(GridShape{2, 2}, 2, 120);
  const SynthData data = synth_generate(spec, seed);
  Problem p;
  p.cfg.train_years = {1981, 1988};
  p.cfg.valid_years = {1989, 1990};
  p.cfg.learning_rate = 0.01;
  p.cfg.max_epochs = 60;
  p.cfg.patience = 1000;
  p.cfg.dropout_rate = 0.1;
  p.cfg.seed = seed;
  const IndexSpan span = window_span(data.forcing.months, p.cfg.train_years);
  p.forcing = normalize(data.forcing, compute_norm_stats(data.forcing, span));
  p.history = data.history;
  p.model = init_model(ModelConfig{4, 4, 5, hidden, 2}, seed);
  calibrate_head_biases(p.model, p.history, span);
  return p;
}

}  // namespace

TEST(TrainConfigTest, RejectsOverlapAndBackwardWindows) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.valid_years = {2018, 2023};
  EXPECT_THROW(c.validate(), ConfigError);
  c.valid_years = {1970, 1975};
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.quantile_levels = {0.5, 0.4};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, OverlappingWindowsFailBeforeTraining) {
  Problem p = make_problem(1);
  p.cfg.valid_years = {1988, 1990};
  bool stepped = false;
  EXPECT_THROW(train(p.model, p.forcing, p.history, p.cfg, [&](int, const ModelParams&) { stepped = true; }),
               ConfigError);
  EXPECT_FALSE(stepped);
}

TEST(Train, PrecipitationWeightsNonNegativeAfterEveryStep) {
  Problem p = make_problem(2);
  p.cfg.max_epochs = 200;
  p.cfg.learning_rate = 0.05;
  int steps = 0;
  train(p.model, p.forcing, p.history, p.cfg, [&](int epoch, const ModelParams& m) {
    EXPECT_GE(m.w_in_p.minCoeff(), 0.0) << "epoch " << epoch;
    ++steps;
  });
  EXPECT_EQ(steps, 200);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  Problem p = make_problem(3);
  p.cfg.learning_rate = 0.0;
  p.cfg.max_epochs = 5;
  train(p.model, p.forcing, p.history, p.cfg, [&](int, const ModelParams& m) { EXPECT_EQ(m, p.model); });
  const TrainResult r = train(p.model, p.forcing, p.history, p.cfg);
  EXPECT_EQ(r.params, p.model);
  EXPECT_EQ(r.report.selected_epoch, 0);
}

TEST(Train, ValidationLossImprovesOnLearnableData) {
  Problem p = make_problem(4);
  p.cfg.max_epochs = 150;
  const TrainResult r = train(p.model, p.forcing, p.history, p.cfg);
  ASSERT_GE(r.report.epochs.size(), 2u);
  EXPECT_EQ(r.report.epochs[0].epoch, 0);
  EXPECT_LT(r.report.epochs[r.report.selected_epoch].valid_loss, r.report.epochs[0].valid_loss);
  EXPECT_LT(r.report.epochs.back().train_loss, r.report.epochs[1].train_loss);
}

TEST(Train, SameSeedIsBitIdentical) {
  const Problem p = make_problem(5);
  const TrainResult a = train(p.model, p.forcing, p.history, p.cfg);
  const TrainResult b = train(p.model, p.forcing, p.history, p.cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.report.to_csv(), b.report.to_csv());
  TrainConfig other = p.cfg;
  other.seed = 6;
  EXPECT_FALSE(train(p.model, p.forcing, p.history, other).params == a.params);
}

TEST(Train, ReturnsTheBestValidationSnapshot) {
  Problem p = make_problem(7);
  p.cfg.learning_rate = 0.05;
  p.cfg.max_epochs = 80;
  std::vector<ModelParams> seen{p.model};
  const TrainResult r =
      train(p.model, p.forcing, p.history, p.cfg, [&](int, const ModelParams& m) { seen.push_back(m); });
  ASSERT_EQ(seen.size(), r.report.epochs.size());
  EXPECT_EQ(r.params, seen[r.report.selected_epoch]);
  for (const auto& e : r.report.epochs) EXPECT_GE(e.valid_loss, r.report.epochs[r.report.selected_epoch].valid_loss);
  const QuantileSet qs(p.cfg.quantile_levels);
  EXPECT_DOUBLE_EQ(evaluate_loss(r.params, p.forcing, p.history, p.cfg.valid_years, qs),
                   r.report.epochs[r.report.selected_epoch].valid_loss);
}

TEST(Train, EarlyStoppingHonoursPatience) {
  Problem p = make_problem(8);
  p.cfg.learning_rate = 0.0;
  p.cfg.max_epochs = 100;
  p.cfg.patience = 7;
  const TrainResult r = train(p.model, p.forcing, p.history, p.cfg);
  EXPECT_EQ(r.report.epochs.size(), 8u);
  EXPECT_EQ(r.report.to_csv().substr(0, 27), "epoch,train_loss,valid_loss");
}

TEST(EvaluateLoss, SingleMonthMatchesDirectPinball) {
  const Problem p = make_problem(9);
  const QuantileSet qs(p.cfg.quantile_levels);
  const int month = 40;
  const double got = evaluate_loss(p.model, p.forcing, p.history, IndexSpan{month, month + 1}, qs);
  const ForwardPass f = forward(p.model, make_model_input(p.forcing));
  double expect = 0.0;
  for (int k = 0; k < 2; ++k)
    for (double q : qs.levels()) {
      const double yq = ln3_quantile(f.dist.mu(month, k), f.dist.sigma(month, k), f.dist.theta(month, k), q);
      expect += pinball(q, p.history.values(month, k) - yq);
    }
  expect /= 2.0;
  EXPECT_NEAR(got, expect, 1e-12 * std::max(1.0, expect));
  EXPECT_EQ(got, evaluate_loss(p.model, p.forcing, p.history, IndexSpan{month, month + 1}, qs));
}

TEST(EvaluateLoss, EmptyOrOutOfRangeWindowRejected) {
  const Problem p = make_problem(9);
  const QuantileSet qs(p.cfg.quantile_levels);
  EXPECT_THROW(evaluate_loss(p.model, p.forcing, p.history, IndexSpan{5, 5}, qs), DataError);
  EXPECT_THROW(evaluate_loss(p.model, p.forcing, p.history, IndexSpan{100, 130}, qs), DataError);
}

TEST(Calibration, HeadBiasesMatchLogMoments) {
  Problem p = make_problem(10);
  const IndexSpan span{0, 96};
  const Eigen::ArrayXd logs = p.history.values.col(1).head(96).array().log();
  EXPECT_NEAR(p.model.b_mu[1], logs.mean(), 1e-12);
  EXPECT_NEAR(softplus(p.model.b_sigma[1]), std::sqrt((logs - logs.mean()).square().mean()), 1e-9);
  EXPECT_EQ(p.model.b_theta[1], 0.0);
  calibrate_head_biases(p.model, p.history, span);
  EXPECT_THROW(calibrate_head_biases(p.model, p.history, IndexSpan{3, 3}), DataError);
}
