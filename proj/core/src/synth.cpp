#include "hydroscen/synth.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "hydroscen/errors.hpp"
#include "hydroscen/probloss.hpp"
#include "hydroscen/random.hpp"

namespace hydroscen {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

double seasonal(double level, double amplitude, int month, int peak_month) {
  return level * (1.0 + amplitude * std::cos(2.0 * std::numbers::pi * (month - peak_month) / 12.0));
}

// Seasonal precipitation and temperature for `count` months from `start`.
ForcingSeries generate_climate(const SynthSpec& spec, YearMonth start, int count, Rng& rng) {
  ForcingSeries s;
  s.grid = spec.grid;
  s.months = month_sequence(start, count);
  const int cells = spec.grid.cells();
  s.mask.assign(cells, true);
  s.precip = Eigen::MatrixXd::Zero(count, cells);
  s.temp = Eigen::MatrixXd::Zero(count, cells);

  const double sigma_ln = std::sqrt(std::log1p(spec.precip_cv * spec.precip_cv));
  const double rho = spec.precip_spatial_corr;
  const double phi = spec.precip_persistence;
  double anomaly = rng.normal();
  for (int t = 0; t < count; ++t) {
    if (t > 0) anomaly = phi * anomaly + std::sqrt(1.0 - phi * phi) * rng.normal();
    const int m = s.months[t].month - 1;
    const double temp_anomaly = rng.normal();
    for (int c = 0; c < cells; ++c) {
      const double local = std::sqrt(rho) * anomaly + std::sqrt(1.0 - rho) * rng.normal();
      s.precip(t, c) = spec.precip_mean[m] * std::exp(sigma_ln * local - 0.5 * sigma_ln * sigma_ln);
      // Warm anomalies come with dry months.
      s.temp(t, c) = spec.temp_mean[m] + spec.temp_sd * (0.6 * temp_anomaly - 0.4 * anomaly +
                                                         0.2 * rng.normal());
    }
  }
  return s;
}

std::array<double, 12> read_monthly(const json& j, const char* key) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != 12) throw ConfigError(std::string("synth: '") + key + "' needs 12 values");
  std::array<double, 12> out{};
  for (int i = 0; i < 12; ++i) out[i] = arr[i].get<double>();
  return out;
}

}  // namespace

SynthSpec SynthSpec::defaults(GridShape grid, int n_plants, int n_months) {
  SynthSpec s;
  s.grid = grid;
  s.n_plants = n_plants;
  s.n_months = n_months;
  for (int m = 1; m <= 12; ++m) {
    s.base[m - 1] = seasonal(600.0, 0.4, m, 3);
    s.precip_mean[m - 1] = seasonal(120.0, 0.6, m, 1);
    s.temp_mean[m - 1] = seasonal(22.0, 0.15, m, 1);
  }
  s.weights = Eigen::MatrixXd(grid.cells(), n_plants);
  for (int c = 0; c < grid.cells(); ++c)
    for (int p = 0; p < n_plants; ++p) s.weights(c, p) = 0.002 + 0.002 * ((c + 2 * p) % 3);
  return s;
}

void validate(const SynthSpec& s) {
  if (s.grid.rows <= 0 || s.grid.cols <= 0) throw ConfigError("synth: grid shape must be positive");
  if (s.n_plants <= 0) throw ConfigError("synth: n_plants must be positive");
  if (!s.plant_ids.empty() && static_cast<int>(s.plant_ids.size()) != s.n_plants)
    throw ConfigError("synth: plant_ids length must equal n_plants");
  if (s.n_months <= 0) throw ConfigError("synth: n_months must be positive");
  if (!s.start.valid()) throw ConfigError("synth: invalid start month");
  for (double b : s.base)
    if (!(b > 0.0)) throw ConfigError("synth: seasonal base must be positive");
  if (!(s.noise > 0.0)) throw ConfigError("synth: noise scale must be positive");
  if (s.lag != 0 && s.lag != 1) throw ConfigError("synth: lag must be 0 or 1");
  if (s.weights.rows() != s.grid.cells() || s.weights.cols() != s.n_plants)
    throw ConfigError("synth: weights must be (grid cells x plants)");
  if ((s.weights.array() < 0.0).any() || !s.weights.allFinite())
    throw ConfigError("synth: sensitivity weights must be non-negative");
  for (double p : s.precip_mean)
    if (p < 0.0) throw ConfigError("synth: precipitation means must be non-negative");
  if (s.precip_cv < 0.0) throw ConfigError("synth: precip_cv must be non-negative");
  if (s.precip_spatial_corr < 0.0 || s.precip_spatial_corr > 1.0)
    throw ConfigError("synth: precip_spatial_corr must lie in [0, 1]");
  if (s.noise_persistence < 0.0 || s.noise_persistence >= 1.0)
    throw ConfigError("synth: noise_persistence must lie in [0, 1)");
  if (s.precip_persistence < 0.0 || s.precip_persistence >= 1.0)
    throw ConfigError("synth: precip_persistence must lie in [0, 1)");
  if (s.temp_sd < 0.0) throw ConfigError("synth: temp_sd must be non-negative");
  QuantileSet check(s.truth_levels);
  if (s.ensemble) {
    if (s.ensemble->n_traj <= 0 || s.ensemble->horizon <= 0 || !s.ensemble->start.valid())
      throw ConfigError("synth: invalid ensemble section");
  }
}

double GroundTruth::quantile(int t, int p, double q) const {
  return expected(t, p) * std::exp(noise * std_normal_quantile(q) - 0.5 * noise * noise);
}

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  validate(spec);
  SynthData out;
  const int warm = spec.lag;
  const int total = spec.n_months + warm;

  Rng climate_rng(derive_seed(seed, 1));
  ForcingSeries full = generate_climate(spec, spec.start.plus(-warm), total, climate_rng);
  out.forcing = full.slice(IndexSpan{warm, total});

  std::vector<std::string> plants = spec.plant_ids;
  if (plants.empty())
    for (int p = 0; p < spec.n_plants; ++p) plants.push_back("P" + std::to_string(p + 1));

  GroundTruth& truth = out.truth;
  truth.months = out.forcing.months;
  truth.plants = plants;
  truth.noise = spec.noise;
  truth.levels = spec.truth_levels;
  truth.expected = Eigen::MatrixXd(spec.n_months, spec.n_plants);
  for (int t = 0; t < spec.n_months; ++t) {
    const int m = truth.months[t].month - 1;
    Eigen::RowVectorXd driven = full.precip.row(t + warm - spec.lag) * spec.weights;
    truth.expected.row(t) = spec.base[m] * (1.0 + driven.array());
  }
  for (double q : truth.levels) {
    const double factor = std::exp(spec.noise * std_normal_quantile(q) - 0.5 * spec.noise * spec.noise);
    truth.quantiles.push_back(truth.expected * factor);
  }

  Rng noise_rng(derive_seed(seed, 2));
  DischargeHistory& h = out.history;
  h.plants = plants;
  h.months = truth.months;
  h.values = Eigen::MatrixXd(spec.n_months, spec.n_plants);
  const double s = spec.noise;
  const double rho = spec.noise_persistence;
  const double innovation = std::sqrt(1.0 - rho * rho);
  // Stationary AR(1) standard normal per plant; rho = 0 gives i.i.d. draws.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(spec.n_plants);
  for (int t = 0; t < spec.n_months; ++t)
    for (int p = 0; p < spec.n_plants; ++p) {
      z[p] = t == 0 ? noise_rng.normal() : rho * z[p] + innovation * noise_rng.normal();
      h.values(t, p) = truth.expected(t, p) * std::exp(s * z[p] - 0.5 * s * s);
    }

  if (spec.ensemble) {
    EnsembleSet e;
    e.start = spec.ensemble->start;
    e.horizon = spec.ensemble->horizon;
    e.source_label = spec.ensemble->label;
    for (int i = 0; i < spec.ensemble->n_traj; ++i) {
      Rng traj_rng(derive_seed(seed, 3, static_cast<std::uint64_t>(i)));
      e.ids.push_back(i);
      e.trajectories.push_back(generate_climate(spec, e.start, e.horizon, traj_rng));
    }
    out.ensemble = std::move(e);
  }
  return out;
}

SynthSpec synth_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  try {
    const auto grid = j.at("grid_shape");
    SynthSpec s = SynthSpec::defaults(GridShape{grid.at(0).get<int>(), grid.at(1).get<int>()},
                                      j.at("n_plants").get<int>(), j.value("n_months", 516));
    if (j.contains("plant_ids")) s.plant_ids = j["plant_ids"].get<std::vector<std::string>>();
    if (j.contains("start")) s.start = YearMonth{j["start"].at(0).get<int>(), j["start"].at(1).get<int>()};
    if (j.contains("base")) s.base = read_monthly(j, "base");
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      if (w.is_number()) {
        s.weights.setConstant(w.get<double>());
      } else {
        if (!w.is_array() || static_cast<int>(w.size()) != s.grid.cells())
          throw ConfigError("synth: weights must have one row per grid cell");
        for (int c = 0; c < s.grid.cells(); ++c) {
          if (!w[c].is_array() || static_cast<int>(w[c].size()) != s.n_plants)
            throw ConfigError("synth: each weights row needs one value per plant");
          for (int p = 0; p < s.n_plants; ++p) s.weights(c, p) = w[c][p].get<double>();
        }
      }
    }
    s.lag = j.value("lag", s.lag);
    s.noise = j.value("noise", s.noise);
    s.noise_persistence = j.value("noise_persistence", s.noise_persistence);
    if (j.contains("precip_mean")) s.precip_mean = read_monthly(j, "precip_mean");
    s.precip_cv = j.value("precip_cv", s.precip_cv);
    s.precip_spatial_corr = j.value("precip_spatial_corr", s.precip_spatial_corr);
    s.precip_persistence = j.value("precip_persistence", s.precip_persistence);
    if (j.contains("temp_mean")) s.temp_mean = read_monthly(j, "temp_mean");
    s.temp_sd = j.value("temp_sd", s.temp_sd);
    if (j.contains("truth_levels")) s.truth_levels = j["truth_levels"].get<std::vector<double>>();
    if (j.contains("ensemble") && !j["ensemble"].is_null()) {
      const auto& e = j["ensemble"];
      SynthSpec::Ensemble ens;
      ens.n_traj = e.value("n_traj", ens.n_traj);
      ens.horizon = e.value("horizon", ens.horizon);
      if (e.contains("start")) ens.start = YearMonth{e["start"].at(0).get<int>(), e["start"].at(1).get<int>()};
      ens.label = e.value("label", ens.label);
      s.ensemble = ens;
    }
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
}

std::string synth_spec_to_json(const SynthSpec& s) {
  ordered_json j;
  j["grid_shape"] = {s.grid.rows, s.grid.cols};
  j["n_plants"] = s.n_plants;
  if (!s.plant_ids.empty()) j["plant_ids"] = s.plant_ids;
  j["start"] = {s.start.year, s.start.month};
  j["n_months"] = s.n_months;
  j["base"] = s.base;
  ordered_json w = ordered_json::array();
  for (int c = 0; c < s.weights.rows(); ++c) {
    std::vector<double> row(s.weights.cols());
    for (int p = 0; p < s.weights.cols(); ++p) row[p] = s.weights(c, p);
    w.push_back(row);
  }
  j["weights"] = w;
  j["lag"] = s.lag;
  j["noise"] = s.noise;
  j["noise_persistence"] = s.noise_persistence;
  j["precip_mean"] = s.precip_mean;
  j["precip_cv"] = s.precip_cv;
  j["precip_spatial_corr"] = s.precip_spatial_corr;
  j["precip_persistence"] = s.precip_persistence;
  j["temp_mean"] = s.temp_mean;
  j["temp_sd"] = s.temp_sd;
  j["truth_levels"] = s.truth_levels;
  if (s.ensemble) {
    j["ensemble"] = {{"n_traj", s.ensemble->n_traj},
                     {"horizon", s.ensemble->horizon},
                     {"start", {s.ensemble->start.year, s.ensemble->start.month}},
                     {"label", s.ensemble->label}};
  }
  return j.dump(2) + "\n";
}

std::string ground_truth_to_json(const GroundTruth& g) {
  ordered_json j;
  j["noise"] = g.noise;
  j["plants"] = g.plants;
  j["levels"] = g.levels;
  ordered_json rows = ordered_json::array();
  for (int t = 0; t < static_cast<int>(g.months.size()); ++t) {
    for (int p = 0; p < static_cast<int>(g.plants.size()); ++p) {
      ordered_json r;
      r["year"] = g.months[t].year;
      r["month"] = g.months[t].month;
      r["plant_id"] = g.plants[p];
      r["expected"] = g.expected(t, p);
      std::vector<double> q;
      for (const auto& m : g.quantiles) q.push_back(m(t, p));
      r["quantiles"] = q;
      rows.push_back(std::move(r));
    }
  }
  j["cells"] = std::move(rows);
  return j.dump(1) + "\n";
}

}  // namespace hydroscen
