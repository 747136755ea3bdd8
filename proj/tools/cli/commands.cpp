#include "cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "hydroscen/checkpoint.hpp"
#include "hydroscen/errors.hpp"
#include "hydroscen/eval.hpp"
#include "hydroscen/ingest.hpp"
#include "hydroscen/netcore.hpp"
#include "hydroscen/synth.hpp"

namespace hydroscen::cli {
namespace {

namespace fs = std::filesystem;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void require(const fs::path& path, const char* what, const char* hint) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path.string() + " (" + hint + ")");
}

struct HistoricalData {
  ForcingSeries forcing;
  DischargeHistory history;
};

HistoricalData load_history(const RunConfig& c) {
  require(c.paths.forcing, "forcing file", "set paths.forcing or run `hydroscen synth`");
  require(c.paths.history, "discharge file", "set paths.history or run `hydroscen synth`");
  HistoricalData d{load_forcing(c.paths.forcing), load_discharge(c.paths.history)};
  check_aligned(d.forcing, d.history);
  return d;
}

Checkpoint load_model(const RunConfig& c) {
  require(c.paths.checkpoint, "checkpoint", "set paths.checkpoint or run `hydroscen train` first");
  return load_checkpoint(c.paths.checkpoint);
}

IndexSpan required_span(const std::vector<YearMonth>& months, const YearRange& years, const char* name) {
  const IndexSpan span = window_span(months, years);
  if (span.empty())
    throw DataError(std::string(name) + " window " + std::to_string(years.first) + "-" + std::to_string(years.last) +
                    " has no data");
  return span;
}

void check_plants(const Checkpoint& ckpt, const DischargeHistory& history) {
  if (ckpt.plants != history.plants) throw DataError("discharge plants do not match the checkpoint");
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::vector<fs::path> cmd_synth(const RunConfig& c, std::ostream& log) {
  if (!c.synth) throw ConfigError("config has no synth section");
  const SynthData data = synth_generate(*c.synth, c.seed);
  const fs::path& out = c.paths.output_dir;
  ensure_dir(out);
  std::vector<fs::path> written{out / "forcing.csv", out / "discharge.csv", out / "ground_truth.json"};
  save_forcing(data.forcing, written[0]);
  save_discharge(data.history, written[1]);
  write_text(written[2], ground_truth_to_json(data.truth));
  if (data.ensemble) {
    save_ensemble(*data.ensemble, out / "ensemble");
    written.push_back(out / "ensemble");
  }
  for (const auto& p : written) log << "wrote " << p.string() << '\n';
  return written;
}

std::vector<fs::path> cmd_train(const RunConfig& c, std::ostream& log) {
  c.train.validate();
  const HistoricalData d = load_history(c);
  const IndexSpan train_span = required_span(d.forcing.months, c.train.train_years, "training");
  required_span(d.forcing.months, c.train.valid_years, "validation");

  Checkpoint ckpt;
  ckpt.norm = compute_norm_stats(d.forcing, train_span);
  ckpt.plants = d.history.plants;
  ckpt.quantile_levels = c.train.quantile_levels;
  const ForcingSeries normalized = normalize(d.forcing, ckpt.norm);

  const int cells = static_cast<int>(d.forcing.active_cells().size());
  ModelConfig mc{cells, cells, c.embedding_dim, c.hidden_dim, d.history.n_plants()};
  ModelParams model = init_model(mc, c.seed);
  calibrate_head_biases(model, d.history, train_span);
  TrainResult result = train(std::move(model), normalized, d.history, c.train);
  ckpt.params = std::move(result.params);

  const auto& sel = result.report.epochs[result.report.selected_epoch];
  log << "trained " << result.report.epochs.size() - 1 << " epochs; selected epoch " << sel.epoch
      << " (train loss " << sel.train_loss << ", valid loss " << sel.valid_loss << ")\n";

  ensure_dir(c.paths.output_dir);
  const std::vector<fs::path> written{c.paths.output_dir / "checkpoint.json", c.paths.output_dir / "train_report.csv"};
  save_checkpoint(ckpt, written[0]);
  write_text(written[1], result.report.to_csv());
  for (const auto& p : written) log << "wrote " << p.string() << '\n';
  return written;
}

std::vector<fs::path> cmd_generate(const RunConfig& c, std::ostream& log) {
  const Checkpoint ckpt = load_model(c);
  require(c.paths.ensemble_dir, "ensemble directory", "set paths.ensemble_dir or add an ensemble to the synth section");
  const EnsembleSet ensemble = load_ensemble(c.paths.ensemble_dir);

  GenerateOptions opts;
  opts.threads = c.generate.threads;
  std::optional<HistoricalData> hist;
  if (fs::exists(c.paths.forcing) && fs::exists(c.paths.history)) {
    hist = load_history(c);
    check_plants(ckpt, hist->history);
    opts.h0 = warmup_state(ckpt, hist->forcing, ensemble.start);
  }
  GenerateResult gen = generate(ckpt, ensemble, c.generate.n_scen, c.seed, opts);
  log << "sampled " << gen.scenarios.n_traj() << " trajectories x " << gen.scenarios.n_scen() << " scenarios x "
      << gen.scenarios.horizon() << " months";
  if (gen.scenarios.provenance.clipped > 0) log << " (" << gen.scenarios.provenance.clipped << " draws clipped)";
  log << '\n';

  ensure_dir(c.paths.output_dir);
  std::vector<fs::path> written;
  ScenarioSet scenarios = std::move(gen.scenarios);
  if (c.generate.reorder) {
    SerialModel sm;
    if (c.paths.serial_model) {
      require(*c.paths.serial_model, "serial model", "remove paths.serial_model to fit one from history");
      std::ifstream in(*c.paths.serial_model, std::ios::binary);
      sm = serial_model_from_json(std::string(std::istreambuf_iterator<char>(in), {}));
    } else {
      if (!hist) throw ConfigError("reordering needs forcing and discharge history to fit the serial model");
      const IndexSpan span = required_span(hist->forcing.months, c.train.train_years, "training");
      sm = fit_serial_model(ckpt.params, normalize(hist->forcing, ckpt.norm), hist->history, span,
                            SerialFitOptions{c.generate.diagonal_phi, c.generate.shrinkage});
      written.push_back(c.paths.output_dir / "serial_model.json");
      write_text(written.back(), serial_model_to_json(sm));
    }
    for (const auto& w : sm.warnings) log << "warning: " << w << '\n';
    scenarios = reorder(scenarios, gen.hidden, sm, c.generate.threads);
  }
  const fs::path csv = c.paths.output_dir / "scenarios.csv";
  save_scenarios(scenarios, csv);
  written.push_back(csv);
  written.push_back(c.paths.output_dir / "scenarios.json");
  for (const auto& p : written) log << "wrote " << p.string() << '\n';
  return written;
}

std::vector<fs::path> cmd_report(const RunConfig& c, std::ostream& log) {
  const Checkpoint ckpt = load_model(c);
  const HistoricalData d = load_history(c);
  check_plants(ckpt, d.history);
  const QuantileSet qs(ckpt.quantile_levels);
  const ForcingSeries normalized = normalize(d.forcing, ckpt.norm);
  const IndexSpan train_span = required_span(d.forcing.months, c.train.train_years, "training");
  const IndexSpan valid_span = required_span(d.forcing.months, c.train.valid_years, "validation");
  const fs::path& out = c.paths.output_dir;
  ensure_dir(out);
  std::vector<fs::path> written;

  auto label = [](const YearRange& r) { return std::to_string(r.first) + "-" + std::to_string(r.last); };
  written.push_back(out / "coverage_train.csv");
  write_text(written.back(),
             coverage_table(ckpt.params, normalized, d.history, train_span, qs, label(c.train.train_years)).to_csv());
  const CoverageReport valid =
      coverage_table(ckpt.params, normalized, d.history, valid_span, qs, label(c.train.valid_years));
  written.push_back(out / "coverage_valid.csv");
  write_text(written.back(), valid.to_csv());
  written.push_back(out / "coverage_pairs_valid.csv");
  write_text(written.back(), valid.pairs_csv());

  const ProductivityTable productivity =
      c.paths.productivity ? load_productivity(*c.paths.productivity) : unit_productivity(d.history.plants);
  const double baseline = baseline_energy(d.history, productivity);
  std::optional<ScenarioSet> scenarios;
  if (fs::exists(c.paths.scenarios)) {
    scenarios = load_scenarios(c.paths.scenarios);
    if (scenarios->plants() != d.history.plants) throw DataError("scenario plants do not match the history");
  }

  std::string energy = "source,year,months,paths,p10_pct,p50_pct,p90_pct\n";
  for (const auto& a : inflow_energy(d.history.values, d.history.months, d.history.plants, productivity, baseline))
    energy += "history," + std::to_string(a.year) + ',' + std::to_string(a.months) + ",1," +
              pct(a.percent_of_baseline) + ',' + pct(a.percent_of_baseline) + ',' + pct(a.percent_of_baseline) + '\n';
  if (scenarios) {
    for (const auto& a : scenario_inflow_energy(*scenarios, productivity, baseline)) {
      int months = 0;
      for (const auto& ym : scenarios->months()) months += ym.year == a.year;
      energy += "scenarios," + std::to_string(a.year) + ',' + std::to_string(months) + ',' +
                std::to_string(a.percent.size()) + ',' + pct(empirical_quantile(a.percent, 0.10)) + ',' +
                pct(a.median()) + ',' + pct(empirical_quantile(a.percent, 0.90)) + '\n';
    }
  }
  written.push_back(out / "inflow_energy.csv");
  write_text(written.back(), energy);

  // Model bands over the validation window against observations and the
  // training-window climatology.
  const auto pass = forward(ckpt.params, make_model_input(normalized.slice(IndexSpan{0, valid_span.end})));
  DistSeq dist{pass.dist.mu.middleRows(valid_span.begin, valid_span.size()),
               pass.dist.sigma.middleRows(valid_span.begin, valid_span.size()),
               pass.dist.theta.middleRows(valid_span.begin, valid_span.size())};
  const std::vector<YearMonth> valid_months(d.history.months.begin() + valid_span.begin,
                                            d.history.months.begin() + valid_span.end);
  auto climatology = [&](const std::vector<YearMonth>& months) {
    const auto clim = climatology_curves(d.history, train_span, months, qs);
    return std::make_pair(clim.front(), clim.back());
  };
  BandExportInput model_bands{d.history.plants, valid_months, quantile_curves(dist, qs),
                              d.history.values.middleRows(valid_span.begin, valid_span.size()),
                              climatology(valid_months)};
  for (auto& p : band_export(model_bands, out / "bands")) written.push_back(std::move(p));

  if (scenarios) {
    Eigen::MatrixXd observed =
        Eigen::MatrixXd::Constant(scenarios->horizon(), scenarios->n_plants(), std::numeric_limits<double>::quiet_NaN());
    for (int t = 0; t < scenarios->horizon(); ++t) {
      const auto it = std::find(d.history.months.begin(), d.history.months.end(), scenarios->months()[t]);
      if (it != d.history.months.end()) observed.row(t) = d.history.values.row(it - d.history.months.begin());
    }
    BandExportInput scen_bands{scenarios->plants(), scenarios->months(), scenario_quantile_curves(*scenarios, qs),
                               observed, climatology(scenarios->months())};
    for (auto& p : band_export(scen_bands, out / "bands" / "scenarios")) written.push_back(std::move(p));
  }
  log << "wrote " << written.size() << " report files under " << out.string() << '\n';
  return written;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probabilistic discharge scenario generator", "hydroscen"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  bool no_reorder = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_flag("--no-reorder", no_reorder, "Skip serial-correlation reordering");
  };
  auto* synth = app.add_subcommand("synth", "Write a synthetic basin (forcing, discharge, ground truth)");
  auto* train_cmd = app.add_subcommand("train", "Train the model and write a checkpoint");
  auto* gen = app.add_subcommand("generate", "Sample ensemble-conditioned discharge scenarios");
  auto* report = app.add_subcommand("report", "Write coverage, inflow-energy and band reports");
  for (auto* sub : {synth, train_cmd, gen, report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    RunConfig config = load_run_config(config_path);
    for (auto* sub : {synth, train_cmd, gen, report})
      if (sub->count("--seed") > 0) override_seed(config, seed);
    if (no_reorder) config.generate.reorder = false;
    if (synth->parsed()) cmd_synth(config, out);
    if (train_cmd->parsed()) cmd_train(config, out);
    if (gen->parsed()) cmd_generate(config, out);
    if (report->parsed()) cmd_report(config, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace hydroscen::cli
