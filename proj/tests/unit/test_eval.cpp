#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hydroscen/errors.hpp"
#include "hydroscen/eval.hpp"
#include "hydroscen/synth.hpp"

using namespace hydroscen;
namespace fx = hydroscen::testing;

namespace {

const QuantileSet kLevels = QuantileSet::default_levels();

// Four increasing curves (month x plant) and observations placed in chosen bands.
struct BandFixture {
  std::vector<Eigen::MatrixXd> curves;
  Eigen::MatrixXd observed;
};

BandFixture place_in_bands(int months, int below, int mid, int above) {
  BandFixture f;
  for (double level : {10.0, 20.0, 30.0, 40.0}) f.curves.push_back(Eigen::MatrixXd::Constant(months, 1, level));
  f.observed = Eigen::MatrixXd::Constant(months, 1, 15.0);  // lower gap, unreported
  int t = 0;
  for (int i = 0; i < below; ++i) f.observed(t++, 0) = 5.0;
  for (int i = 0; i < mid; ++i) f.observed(t++, 0) = 25.0;
  for (int i = 0; i < above; ++i) f.observed(t++, 0) = 50.0;
  return f;
}

std::string row_of(const std::string& csv) {
  const auto first = csv.find('\n') + 1;
  return csv.substr(first, csv.find('\n', first) - first);
}

}  // namespace

TEST(Bands, StrictMembership) {
  EXPECT_EQ(classify_band(1.0, 2, 3, 4, 5), Band::below_q1);
  EXPECT_EQ(classify_band(2.0, 2, 3, 4, 5), Band::lower_gap);
  EXPECT_EQ(classify_band(3.0, 2, 3, 4, 5), Band::lower_gap);
  EXPECT_EQ(classify_band(3.5, 2, 3, 4, 5), Band::mid);
  EXPECT_EQ(classify_band(4.0, 2, 3, 4, 5), Band::upper_gap);
  EXPECT_EQ(classify_band(5.0, 2, 3, 4, 5), Band::upper_gap);
  EXPECT_EQ(classify_band(5.5, 2, 3, 4, 5), Band::above_q4);
  EXPECT_STREQ(band_name(Band::mid), "q2_q3");
}

TEST(Coverage, ReferenceTripleForDefaultLevels) {
  const BandFrequencies r = reference_frequencies(kLevels);
  EXPECT_NEAR(r.mid, 35.0, 1e-12);
  EXPECT_NEAR(r.below, 10.0, 1e-12);
  EXPECT_NEAR(r.above, 5.0, 1e-12);
  EXPECT_THROW(reference_frequencies(QuantileSet({0.1, 0.5, 0.9})), ConfigError);
}

TEST(Coverage, PublishedRowReproducedFromCounts) {
  const BandFixture valid = place_in_bands(60, 9, 14, 5);
  const CoverageReport v = coverage_from_curves(valid.observed, valid.curves, {"ITAIPU"}, kLevels, "2019-2023");
  EXPECT_EQ(row_of(v.to_csv()), "ITAIPU,2019-2023,60,35.0,23.3,10.0,15.0,5.0,8.3");

  const BandFixture train = place_in_bands(360, 28, 144, 14);
  const CoverageReport t = coverage_from_curves(train.observed, train.curves, {"ITAIPU"}, kLevels, "1981-2018");
  EXPECT_EQ(row_of(t.to_csv()), "ITAIPU,1981-2018,360,35.0,40.0,10.0,7.8,5.0,3.9");
  EXPECT_EQ(t.to_csv().substr(0, t.to_csv().find('\n')),
            "plant_id,window,n,ref_mid,obs_mid,ref_below_q1,obs_below_q1,ref_above_q4,obs_above_q4");
}

TEST(Coverage, ObservationOnTheLowestCurveIsNeverBelow) {
  BandFixture f = place_in_bands(24, 0, 0, 0);
  f.observed = f.curves[0];
  const CoverageReport r = coverage_from_curves(f.observed, f.curves, {"P"}, kLevels);
  EXPECT_EQ(r.rows[0].observed.below, 0.0);
  EXPECT_EQ(r.rows[0].observed.mid, 0.0);
}

TEST(Coverage, FrequenciesAndGapsSumToOneHundred) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    BandFixture f = place_in_bands(37, 0, 0, 0);
    for (int t = 0; t < 37; ++t) f.observed(t, 0) = 50.0 * rng.uniform();
    const CoverageReport r = coverage_from_curves(f.observed, f.curves, {"P"}, kLevels);
    int gaps = 0;
    for (int t = 0; t < 37; ++t) {
      const Band b = classify_band(f.observed(t, 0), 10, 20, 30, 40);
      gaps += b == Band::lower_gap || b == Band::upper_gap;
    }
    const auto& o = r.rows[0].observed;
    EXPECT_NEAR(o.mid + o.below + o.above + 100.0 * gaps / 37.0, 100.0, 1e-9);
  }
}

TEST(Coverage, InvariantUnderPlantRelabelingAndOrder) {
  Rng rng(4);
  std::vector<Eigen::MatrixXd> curves;
  for (double level : {1.0, 2.0, 3.0, 4.0}) curves.push_back(Eigen::MatrixXd::Constant(30, 3, level));
  Eigen::MatrixXd obs(30, 3);
  for (int i = 0; i < 90; ++i) obs.data()[i] = 5.0 * rng.uniform();
  const CoverageReport a = coverage_from_curves(obs, curves, {"A", "B", "C"}, kLevels);
  // New column j holds old plant order[j], under a new name.
  const std::vector<int> order{2, 0, 1};
  auto shuffle = [&](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (int j = 0; j < 3; ++j) out.col(j) = m.col(order[j]);
    return out;
  };
  std::vector<Eigen::MatrixXd> permuted;
  for (const auto& c : curves) permuted.push_back(shuffle(c));
  const CoverageReport b = coverage_from_curves(shuffle(obs), permuted, {"z", "x", "y"}, kLevels);
  for (int j = 0; j < 3; ++j) {
    const auto& before = a.rows[order[j]].counts;
    EXPECT_EQ(before.mid, b.rows[j].counts.mid);
    EXPECT_EQ(before.below_q1, b.rows[j].counts.below_q1);
    EXPECT_EQ(before.above_q4, b.rows[j].counts.above_q4);
  }
}

TEST(Coverage, PairsExportCarriesMeanDischarge) {
  const BandFixture f = place_in_bands(60, 9, 14, 5);
  const CoverageReport r = coverage_from_curves(f.observed, f.curves, {"ITAIPU"}, kLevels, "2019-2023");
  const std::string csv = r.pairs_csv();
  EXPECT_NEAR(r.rows[0].mean_discharge, f.observed.mean(), 1e-12);
  EXPECT_NE(csv.find("ITAIPU,2019-2023," + format_number(f.observed.mean()) + ",q2_q3,35.0,23.3"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Coverage, GroundTruthQuantilesConvergeToReference) {
  // Averaged over 10 seeds; a single 600-month window has a binomial sd near 2 pp.
  const BandFrequencies ref = reference_frequencies(kLevels);
  const int seeds = 10;
  BandFrequencies mean;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const SynthData d = synth_generate(SynthSpec::defaults(GridShape{2, 2}, 1, 600), seed);
    const CoverageReport r = coverage_from_curves(d.history.values, d.truth.quantiles, d.history.plants, kLevels);
    const auto& o = r.rows[0].observed;
    EXPECT_NEAR(o.mid, ref.mid, 10.0) << seed;
    mean.mid += o.mid / seeds;
    mean.below += o.below / seeds;
    mean.above += o.above / seeds;
  }
  EXPECT_NEAR(mean.mid, ref.mid, 3.0);
  EXPECT_NEAR(mean.below, ref.below, 3.0);
  EXPECT_NEAR(mean.above, ref.above, 3.0);
}

TEST(Coverage, TableMatchesCurvesFromForward) {
  const ForcingSeries forcing = fx::make_forcing(YearMonth{2000, 1}, 36, GridShape{2, 2}, 1);
  const DischargeHistory hist = fx::make_history(forcing.months, 2, 2);
  ModelParams m = fx::random_model(ModelConfig{4, 4, 3, 3, 2}, 3);
  m.b_mu.setConstant(std::log(hist.values.mean()));
  const IndexSpan window{24, 36};
  const CoverageReport r = coverage_table(m, forcing, hist, window, kLevels, "w");
  const ForwardPass f = forward(m, make_model_input(forcing));
  const DistSeq d{f.dist.mu.bottomRows(12), f.dist.sigma.bottomRows(12), f.dist.theta.bottomRows(12)};
  const CoverageReport direct =
      coverage_from_curves(hist.values.bottomRows(12), quantile_curves(d, kLevels), hist.plants, kLevels, "w");
  EXPECT_EQ(r.to_csv(), direct.to_csv());
  EXPECT_THROW(coverage_table(m, forcing, hist, IndexSpan{3, 3}, kLevels), DataError);
}

TEST(Energy, WeightedSum) {
  Eigen::MatrixXd y(1, 2);
  y << 10, 5;
  const ProductivityTable rho = productivity_from_csv("plant_id,productivity\nA,1\nB,2\n");
  EXPECT_DOUBLE_EQ(monthly_energy(y, {"A", "B"}, rho)[0], 20.0);
  EXPECT_THROW(monthly_energy(y, {"A", "C"}, rho), DataError);
}

TEST(Energy, ConstantHistoryIsOneHundredPercent) {
  DischargeHistory h;
  h.plants = {"A", "B"};
  h.months = month_sequence(YearMonth{2001, 1}, 36);
  h.values = Eigen::MatrixXd::Constant(36, 2, 70.0);
  const ProductivityTable rho = unit_productivity(h.plants);
  const double base = baseline_energy(h, rho);
  EXPECT_DOUBLE_EQ(base, 140.0);
  const auto years = inflow_energy(h.values, h.months, h.plants, rho, base);
  ASSERT_EQ(years.size(), 3u);
  for (const auto& y : years) {
    EXPECT_DOUBLE_EQ(y.percent_of_baseline, 100.0);
    EXPECT_EQ(y.months, 12);
  }
}

TEST(Energy, ProductivityCsvValidation) {
  EXPECT_THROW(productivity_from_csv("plant_id,productivity\nA,0\n"), DataError);
  EXPECT_THROW(productivity_from_csv("plant_id,productivity\nA,1\nA,2\n"), DataError);
  EXPECT_THROW(productivity_from_csv("plant,rho\nA,1\n"), DataError);
  fx::TempDir dir("prod");
  fx::write_file(dir / "p.csv", "plant_id,productivity\nITAIPU,0.72\n");
  EXPECT_DOUBLE_EQ(load_productivity(dir / "p.csv").factors.at("ITAIPU"), 0.72);
}

TEST(Energy, ScenarioMedianTracksTheGenerativeExpectation) {
  // Paths drawn from the exact generative law of each month; the median annual
  // mean energy across paths should sit near the expected annual mean.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthSpec spec = SynthSpec::defaults(GridShape{2, 2}, 3, 12);
    spec.start = YearMonth{2020, 1};
    const SynthData d = synth_generate(spec, seed);
    ScenarioSet s({1, 2}, 100, d.truth.months, d.truth.plants);
    Rng rng(derive_seed(seed, 99));
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 100; ++i)
        for (int t = 0; t < 12; ++t)
          for (int p = 0; p < 3; ++p) {
            double u = rng.uniform();
            while (u <= 0.0) u = rng.uniform();
            s.at(k, i, t, p) = d.truth.quantile(t, p, u);
          }
    const ProductivityTable rho = unit_productivity(d.truth.plants);
    const double baseline = 1000.0;
    const auto years = scenario_inflow_energy(s, rho, baseline);
    ASSERT_EQ(years.size(), 1u);
    EXPECT_EQ(years[0].percent.size(), 200u);
    EXPECT_TRUE(std::is_sorted(years[0].percent.begin(), years[0].percent.end()));
    const double expected = 100.0 * d.truth.expected.rowwise().sum().mean() / baseline;
    EXPECT_NEAR(years[0].median() / expected, 1.0, 0.05) << "seed " << seed;
  }
}

TEST(Quantiles, TypeSevenInterpolation) {
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.1), 1.3);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({7}, 0.3), 7.0);
  EXPECT_THROW(empirical_quantile({}, 0.5), DataError);
}

TEST(Quantiles, ClimatologyUsesSameCalendarMonth) {
  DischargeHistory h;
  h.plants = {"A"};
  h.months = month_sequence(YearMonth{2001, 1}, 48);
  h.values.resize(48, 1);
  for (int t = 0; t < 48; ++t) h.values(t, 0) = 100.0 * h.months[t].month + h.months[t].year - 2000;
  const auto c = climatology_curves(h, IndexSpan{0, 36}, month_sequence(YearMonth{2005, 3}, 2), kLevels);
  // March values over 2001-2003 are 301, 302, 303.
  EXPECT_DOUBLE_EQ(c[0](0, 0), empirical_quantile({301, 302, 303}, 0.10));
  EXPECT_DOUBLE_EQ(c[3](1, 0), empirical_quantile({401, 402, 403}, 0.95));
}

TEST(Quantiles, ScenarioCurvesPoolTrajectoriesAndScenarios) {
  ScenarioSet s({1, 2}, 3, month_sequence(YearMonth{2020, 1}, 1), {"A"});
  double v = 1.0;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 3; ++i) s.at(k, i, 0, 0) = v++;
  const auto c = scenario_quantile_curves(s, kLevels);
  EXPECT_DOUBLE_EQ(c[2](0, 0), empirical_quantile({1, 2, 3, 4, 5, 6}, 0.60));
  for (std::size_t l = 1; l < c.size(); ++l) EXPECT_GE(c[l](0, 0), c[l - 1](0, 0));
}

TEST(BandExport, RowsAreNonCrossingAndReExportIsByteIdentical) {
  const ForcingSeries forcing = fx::make_forcing(YearMonth{2019, 1}, 24, GridShape{2, 2}, 4);
  const ModelParams m = fx::random_model(ModelConfig{4, 4, 3, 3, 2}, 5);
  const ForwardPass f = forward(m, make_model_input(forcing));
  BandExportInput in{{"ITAIPU", "SAO SIMAO"}, forcing.months, quantile_curves(f.dist, kLevels), std::nullopt,
                     std::nullopt};
  in.observed = Eigen::MatrixXd::Constant(24, 2, 1.0);
  (*in.observed)(3, 1) = std::nan("");
  fx::TempDir a("band"), b("band");
  const auto written = band_export(in, a.path());
  band_export(in, b.path());
  ASSERT_EQ(written.size(), 4u);
  EXPECT_EQ(written[2].filename(), "band_SAO_SIMAO.csv");
  for (const auto& p : written) EXPECT_EQ(fx::read_file(p), fx::read_file(b / p.filename().string()));
  for (int p = 0; p < 2; ++p)
    for (int t = 0; t < 24; ++t)
      for (int l = 1; l < 4; ++l) EXPECT_LE(in.curves[l - 1](t, p), in.curves[l](t, p));
  const std::string csv = band_csv(in, 1);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "year,month,q1,q2,q3,q4,observed,band");
  EXPECT_NE(fx::read_file(written[3]).find("<svg"), std::string::npos);
}

TEST(BandExport, ObservationBelowBothModelAndClimatology) {
  BandExportInput in;
  in.plants = {"SOBRADINHO"};
  in.months = {YearMonth{2021, 10}};
  for (double q : {266.0, 400.0, 600.0, 900.0}) in.curves.push_back(Eigen::MatrixXd::Constant(1, 1, q));
  in.observed = Eigen::MatrixXd::Constant(1, 1, 203.0);
  in.climatology = std::make_pair(Eigen::MatrixXd::Constant(1, 1, 337.0), Eigen::MatrixXd::Constant(1, 1, 1500.0));
  EXPECT_EQ(row_of(band_csv(in, 0)), "2021,10,266,400,600,900,203,below_q1,337,1500,below");
}

TEST(BandExport, UnwritableDirectoryIsDataError) {
  fx::TempDir dir("band");
  fx::write_file(dir / "blocker", "x");
  BandExportInput in;
  in.plants = {"A"};
  in.months = {YearMonth{2021, 1}};
  for (double q : {1.0, 2.0, 3.0, 4.0}) in.curves.push_back(Eigen::MatrixXd::Constant(1, 1, q));
  EXPECT_THROW(band_export(in, dir / "blocker"), DataError);
}
