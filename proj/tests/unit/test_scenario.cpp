#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hydroscen/errors.hpp"
#include "hydroscen/scenario.hpp"
#include "oracles.hpp"

using namespace hydroscen;
namespace fx = hydroscen::testing;
namespace oracle = hydroscen::testing;

namespace {

const GridShape kGrid{2, 2};

Checkpoint make_checkpoint(std::uint64_t seed) {
  Checkpoint c;
  c.params = fx::random_model(ModelConfig{4, 4, 5, 3, 2}, seed);
  c.params.b_mu.setConstant(std::log(500.0));
  c.params.b_sigma.setConstant(std::log(std::expm1(0.4)));
  c.norm = compute_norm_stats(fx::make_forcing(YearMonth{1981, 1}, 120, kGrid, seed + 1));
  c.plants = {"P1", "P2"};
  c.quantile_levels = {0.10, 0.25, 0.60, 0.95};
  return c;
}

EnsembleSet make_ensemble(int n_traj, int horizon, std::uint64_t seed) {
  EnsembleSet e;
  e.start = YearMonth{2019, 9};
  e.horizon = horizon;
  e.source_label = "test";
  for (int k = 0; k < n_traj; ++k) {
    e.trajectories.push_back(fx::make_forcing(e.start, horizon, kGrid, seed + 10 * k));
    e.ids.push_back(k + 1);
  }
  return e;
}

std::vector<double> sorted_slice(const ScenarioSet& s, int traj, int month, int plant) {
  std::vector<double> v;
  for (int i = 0; i < s.n_scen(); ++i) v.push_back(s.at(traj, i, month, plant));
  std::sort(v.begin(), v.end());
  return v;
}

SerialModel unit_serial_model(int plants, int hidden) {
  SerialModel sm;
  sm.intercept = Eigen::VectorXd::Zero(plants);
  sm.phi_y = Eigen::MatrixXd::Identity(plants, plants);
  sm.phi_h = Eigen::MatrixXd::Zero(plants, hidden);
  sm.theta = Eigen::MatrixXd::Identity(plants, plants);
  sm.theta_inv = sm.theta;
  return sm;
}

}  // namespace

TEST(Generate, ShapeAndProvenance) {
  const Checkpoint c = make_checkpoint(1);
  const GenerateResult r = generate(c, make_ensemble(3, 6, 2), 5, 42);
  EXPECT_EQ(r.scenarios.n_traj(), 3);
  EXPECT_EQ(r.scenarios.n_scen(), 5);
  EXPECT_EQ(r.scenarios.horizon(), 6);
  EXPECT_EQ(r.scenarios.n_plants(), 2);
  EXPECT_EQ(r.scenarios.values().size(), 3u * 5u * 6u * 2u);
  EXPECT_EQ(r.scenarios.months().front(), (YearMonth{2019, 9}));
  EXPECT_EQ(r.scenarios.plants(), c.plants);
  EXPECT_EQ(r.hidden.size(), 3u);
  EXPECT_EQ(r.hidden[0].h.rows(), 6);
  EXPECT_EQ(r.scenarios.provenance.seed, 42u);
  EXPECT_EQ(r.scenarios.provenance.checkpoint_id, content_id(checkpoint_to_json(c)));
  EXPECT_FALSE(r.scenarios.provenance.reordered);
}

TEST(Generate, DeterministicPerSeedAndThreadCount) {
  const Checkpoint c = make_checkpoint(1);
  const EnsembleSet e = make_ensemble(4, 6, 2);
  const ScenarioSet a = generate(c, e, 7, 9).scenarios;
  EXPECT_EQ(a, generate(c, e, 7, 9).scenarios);
  EXPECT_EQ(a, generate(c, e, 7, 9, GenerateOptions{std::nullopt, 4}).scenarios);
  EXPECT_NE(a.values(), generate(c, e, 7, 10).scenarios.values());
}

TEST(Generate, StreamsFollowTrajectoryIdsNotPositions) {
  const Checkpoint c = make_checkpoint(1);
  const EnsembleSet e = make_ensemble(3, 4, 2);
  EnsembleSet swapped = e;
  std::swap(swapped.trajectories[0], swapped.trajectories[2]);
  std::swap(swapped.ids[0], swapped.ids[2]);
  const ScenarioSet a = generate(c, e, 4, 3).scenarios;
  const ScenarioSet b = generate(c, swapped, 4, 3).scenarios;
  for (int s = 0; s < 4; ++s)
    for (int t = 0; t < 4; ++t)
      for (int p = 0; p < 2; ++p) {
        EXPECT_EQ(a.at(0, s, t, p), b.at(2, s, t, p));
        EXPECT_EQ(a.at(1, s, t, p), b.at(1, s, t, p));
      }
}

TEST(Generate, EmpiricalCoverageOfUpperQuantile) {
  const Checkpoint c = make_checkpoint(3);
  const GenerateResult r = generate(c, make_ensemble(1, 3, 4), 10000, 5);
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 2; ++p) {
      const DistSeq& d = r.dist[0];
      const double q95 = ln3_quantile(d.mu(t, p), d.sigma(t, p), d.theta(t, p), 0.95);
      int below = 0;
      for (int s = 0; s < 10000; ++s) below += r.scenarios.at(0, s, t, p) <= q95 ? 1 : 0;
      // Binomial standard deviation at n = 1e4 is about 0.0022.
      EXPECT_NEAR(below / 10000.0, 0.95, 0.01) << t << "," << p;
    }
}

TEST(Generate, DrawsAreFlooredAndCounted) {
  Checkpoint c = make_checkpoint(4);
  c.params.b_theta.setConstant(-1e4);
  const GenerateResult r = generate(c, make_ensemble(2, 3, 1), 10, 1);
  for (double v : r.scenarios.values()) EXPECT_GE(v, kScenarioFloor);
  EXPECT_GT(r.scenarios.provenance.clipped, 0);
}

TEST(Generate, InvalidRequestsRejected) {
  const Checkpoint c = make_checkpoint(1);
  EXPECT_THROW(generate(c, make_ensemble(2, 3, 1), 0, 1), ConfigError);
  EnsembleSet other = make_ensemble(2, 3, 1);
  for (auto& t : other.trajectories) t = fx::make_forcing(other.start, 3, GridShape{1, 4}, 2);
  EXPECT_THROW(generate(c, other, 3, 1), DataError);
}

TEST(Warmup, ZeroWithoutPriorMonthsAndMatchesForwardOtherwise) {
  const Checkpoint c = make_checkpoint(2);
  const ForcingSeries hist = fx::make_forcing(YearMonth{2018, 1}, 30, kGrid, 3);
  EXPECT_EQ(warmup_state(c, hist, YearMonth{2017, 5}), Eigen::VectorXd::Zero(3));
  const Eigen::VectorXd h = warmup_state(c, hist, YearMonth{2019, 9});
  const ForwardPass f = forward(c.params, make_model_input(normalize(hist.slice(IndexSpan{0, 20}), c.norm)));
  EXPECT_EQ(h, f.h.col(20));
}

TEST(SerialFit, RecoversKnownRegression) {
  Rng rng(11);
  const int T = 5000;
  Eigen::MatrixXd y(T, 1), h(T, 2);
  for (int t = 0; t < T; ++t) h.row(t) << rng.normal(), rng.uniform();
  y(0, 0) = 6.0;
  for (int t = 1; t < T; ++t) y(t, 0) = 2.0 + 0.7 * y(t - 1, 0) + 0.5 * h(t - 1, 0) - 1.0 * h(t - 1, 1) + 0.1 * rng.normal();
  const SerialModel sm = fit_serial_regression(y, h);
  EXPECT_NEAR(sm.intercept[0], 2.0, 0.05);
  EXPECT_NEAR(sm.phi_y(0, 0), 0.7, 0.01);
  EXPECT_NEAR(sm.phi_h(0, 0), 0.5, 0.01);
  EXPECT_NEAR(sm.phi_h(0, 1), -1.0, 0.02);
  EXPECT_NEAR(sm.theta(0, 0), 0.01, 0.001);
  EXPECT_TRUE(sm.warnings.empty());

  // Ordinary least squares with an intercept leaves zero-mean residuals, and a
  // single-plant covariance is untouched by shrinkage toward its diagonal.
  double mean = 0.0, var = 0.0;
  for (int t = 1; t < T; ++t) mean += y(t, 0) - sm.predict(y.row(t - 1).transpose(), h.row(t - 1).transpose())[0];
  mean /= T - 1;
  for (int t = 1; t < T; ++t) {
    const double e = y(t, 0) - sm.predict(y.row(t - 1).transpose(), h.row(t - 1).transpose())[0] - mean;
    var += e * e;
  }
  EXPECT_NEAR(mean, 0.0, 1e-9);
  EXPECT_NEAR(sm.theta(0, 0), var / (T - 1), 1e-12);
  EXPECT_NEAR(sm.theta_inv(0, 0) * sm.theta(0, 0), 1.0, 1e-12);
}

TEST(SerialFit, ShrinksOffDiagonalCovariance) {
  Rng rng(12);
  const int T = 400;
  Eigen::MatrixXd y(T, 2), h(T, 1);
  for (int t = 0; t < T; ++t) {
    const double common = rng.normal();
    y.row(t) << common + 0.3 * rng.normal(), common + 0.3 * rng.normal();
    h(t, 0) = rng.normal();
  }
  const SerialModel loose = fit_serial_regression(y, h, SerialFitOptions{false, 0.0});
  const SerialModel shrunk = fit_serial_regression(y, h, SerialFitOptions{false, 0.1});
  EXPECT_NEAR(shrunk.theta(0, 1), 0.9 * loose.theta(0, 1), 1e-12);
  EXPECT_NEAR(shrunk.theta(1, 1), loose.theta(1, 1), 1e-12);
  const SerialModel diag = fit_serial_regression(y, h, SerialFitOptions{true, 0.1});
  EXPECT_EQ(diag.phi_y(0, 1), 0.0);
  EXPECT_EQ(diag.phi_y(1, 0), 0.0);
}

TEST(SerialFit, RankDeficientDesignWarnsAndStaysFinite) {
  Rng rng(13);
  Eigen::MatrixXd y(60, 1), h = Eigen::MatrixXd::Zero(60, 3);
  for (int t = 0; t < 60; ++t) y(t, 0) = 10.0 + rng.normal();
  const SerialModel sm = fit_serial_regression(y, h);
  EXPECT_FALSE(sm.warnings.empty());
  EXPECT_TRUE(sm.phi_h.allFinite());
  EXPECT_TRUE(sm.theta_inv.allFinite());
}

TEST(SerialFit, InvalidInputRejected) {
  EXPECT_THROW(fit_serial_regression(Eigen::MatrixXd::Ones(10, 1), Eigen::MatrixXd::Ones(10, 1)), DataError);
  EXPECT_THROW(fit_serial_regression(Eigen::MatrixXd::Ones(30, 1), Eigen::MatrixXd::Ones(29, 1)), DataError);
  EXPECT_THROW(fit_serial_regression(Eigen::MatrixXd::Random(30, 1), Eigen::MatrixXd::Random(30, 1),
                                     SerialFitOptions{false, 1.5}),
               ConfigError);
}

TEST(SerialFit, JsonRoundTrip) {
  Rng rng(14);
  Eigen::MatrixXd y(50, 2), h(50, 2);
  for (int i = 0; i < 100; ++i) {
    y.data()[i] = rng.normal();
    h.data()[i] = rng.normal();
  }
  const SerialModel sm = fit_serial_regression(y, h);
  const SerialModel back = serial_model_from_json(serial_model_to_json(sm));
  EXPECT_EQ(back.phi_y, sm.phi_y);
  EXPECT_EQ(back.phi_h, sm.phi_h);
  EXPECT_EQ(back.theta, sm.theta);
  EXPECT_EQ(back.intercept, sm.intercept);
  EXPECT_THROW(serial_model_from_json("{}"), DataError);
}

TEST(Mahalanobis, MatchesLoopOracle) {
  Rng rng(15);
  Eigen::MatrixXd y(80, 3), h(80, 2);
  for (int i = 0; i < 240; ++i) y.data()[i] = rng.normal();
  for (int i = 0; i < 160; ++i) h.data()[i] = rng.normal();
  const SerialModel sm = fit_serial_regression(y, h);
  const Eigen::MatrixXd prev = Eigen::MatrixXd::Random(6, 3), curr = Eigen::MatrixXd::Random(6, 3);
  const Eigen::VectorXd hp = Eigen::VectorXd::Random(2);
  const Eigen::MatrixXd got = mahalanobis_cost(prev, hp, curr, sm);
  const Eigen::MatrixXd want =
      oracle::mahalanobis_loop(prev, hp, curr, sm.intercept, sm.phi_y, sm.phi_h, sm.theta_inv);
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(got.minCoeff(), 0.0);
}

TEST(Mahalanobis, IdentityCovarianceIsSquaredDistance) {
  const SerialModel sm = unit_serial_model(2, 1);
  Eigen::MatrixXd prev(2, 2), curr(2, 2);
  prev << 1, 2, 3, 4;
  curr << 1, 2, 0, 0;
  const Eigen::MatrixXd c = mahalanobis_cost(prev, Eigen::VectorXd::Zero(1), curr, sm);
  EXPECT_DOUBLE_EQ(c(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 8.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 25.0);
}

TEST(Reorder, SingleScenarioIsUnchanged) {
  const Checkpoint c = make_checkpoint(1);
  const GenerateResult r = generate(c, make_ensemble(2, 4, 3), 1, 1);
  const ScenarioSet out = reorder(r.scenarios, r.hidden, unit_serial_model(2, 3));
  EXPECT_EQ(out.values(), r.scenarios.values());
  EXPECT_TRUE(out.provenance.reordered);
}

TEST(Reorder, RestoresAShuffledPersistentPath) {
  ScenarioSet s({1}, 6, month_sequence(YearMonth{2020, 1}, 3), {"P1"});
  const double level[6] = {5, 1, 4, 2, 6, 3};
  const int shuffle1[6] = {3, 0, 5, 1, 2, 4}, shuffle2[6] = {2, 4, 0, 5, 3, 1};
  for (int i = 0; i < 6; ++i) {
    s.at(0, i, 0, 0) = level[i];
    s.at(0, i, 1, 0) = level[shuffle1[i]];
    s.at(0, i, 2, 0) = level[shuffle2[i]];
  }
  const ScenarioSet out = reorder(s, {HiddenSeq{Eigen::MatrixXd::Zero(3, 1)}}, unit_serial_model(1, 1));
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(out.at(0, i, 1, 0), level[i]);
    EXPECT_EQ(out.at(0, i, 2, 0), level[i]);
  }
}

TEST(Reorder, PermutesValuesWithinEachMonth) {
  const Checkpoint c = make_checkpoint(6);
  const GenerateResult r = generate(c, make_ensemble(3, 6, 5), 12, 8);
  SerialModel sm = unit_serial_model(2, 3);
  sm.phi_y *= 0.8;
  sm.intercept.setConstant(100.0);
  const ScenarioSet out = reorder(r.scenarios, r.hidden, sm, 2);
  for (int k = 0; k < 3; ++k)
    for (int t = 0; t < 6; ++t)
      for (int p = 0; p < 2; ++p) EXPECT_EQ(sorted_slice(out, k, t, p), sorted_slice(r.scenarios, k, t, p));
  // Scenario rows move as a unit: plants stay paired within a relabeled row.
  for (int k = 0; k < 3; ++k)
    for (int t = 0; t < 6; ++t)
      for (int i = 0; i < 12; ++i) {
        bool found = false;
        for (int j = 0; j < 12 && !found; ++j)
          found = out.at(k, i, t, 0) == r.scenarios.at(k, j, t, 0) && out.at(k, i, t, 1) == r.scenarios.at(k, j, t, 1);
        EXPECT_TRUE(found);
      }
  EXPECT_EQ(out, reorder(r.scenarios, r.hidden, sm, 1));
}

TEST(Reorder, IncreasesLagOneCorrelation) {
  const Checkpoint c = make_checkpoint(7);
  const GenerateResult r = generate(c, make_ensemble(4, 6, 9), 30, 2);
  SerialModel sm = unit_serial_model(2, 3);
  sm.theta = Eigen::MatrixXd::Identity(2, 2) * 1e4;
  sm.theta_inv = Eigen::MatrixXd::Identity(2, 2) * 1e-4;
  const double before = mean_lag1_correlation(r.scenarios);
  const double after = mean_lag1_correlation(reorder(r.scenarios, r.hidden, sm));
  EXPECT_LT(std::fabs(before), 0.2);
  EXPECT_GT(after, before + 0.3);
}

TEST(ScenarioIo, CsvRoundTripAndProvenanceSidecar) {
  const Checkpoint c = make_checkpoint(1);
  const ScenarioSet s = generate(c, make_ensemble(2, 3, 3), 4, 5).scenarios;
  const std::string csv = scenarios_to_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "trajectory,scenario,year,month,plant_id,discharge_m3s");
  const ScenarioSet back = scenarios_from_csv(csv);
  ASSERT_EQ(back.values().size(), s.values().size());
  // Nine significant digits on disk.
  for (std::size_t i = 0; i < s.values().size(); ++i) EXPECT_NEAR(back.values()[i] / s.values()[i], 1.0, 1e-8);
  EXPECT_EQ(back.traj_ids(), s.traj_ids());
  EXPECT_EQ(scenarios_to_csv(back), csv);

  fx::TempDir dir("scen");
  save_scenarios(s, dir / "scenarios.csv");
  const ScenarioSet loaded = load_scenarios(dir / "scenarios.csv");
  EXPECT_EQ(loaded.values(), back.values());
  EXPECT_EQ(loaded.provenance.checkpoint_id, s.provenance.checkpoint_id);
  EXPECT_EQ(loaded.provenance.seed, 5u);
}

TEST(ScenarioIo, IncompleteCsvRejected) {
  const Checkpoint c = make_checkpoint(1);
  std::string csv = scenarios_to_csv(generate(c, make_ensemble(1, 3, 3), 2, 5).scenarios);
  csv.erase(csv.rfind('\n', csv.size() - 2) + 1);
  EXPECT_THROW(scenarios_from_csv(csv), DataError);
  EXPECT_THROW(scenarios_from_csv("a,b,c\n1,2,3\n"), DataError);
}
