#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cli/run_config.hpp"
#include "hydroscen/scenario.hpp"
#include "hydroscen/train.hpp"

namespace hydroscen::cli {

/// Output files, all under `config.paths.output_dir`:
///   synth     forcing.csv, discharge.csv, ground_truth.json [, ensemble/]
///   train     checkpoint.json, train_report.csv
///   generate  scenarios.csv, scenarios.json [, serial_model.json]
///   report    coverage_train.csv, coverage_valid.csv, inflow_energy.csv, bands/
/// Each returns the paths it wrote and logs one line per file to `log`.
std::vector<std::filesystem::path> cmd_synth(const RunConfig& config, std::ostream& log);
std::vector<std::filesystem::path> cmd_train(const RunConfig& config, std::ostream& log);
std::vector<std::filesystem::path> cmd_generate(const RunConfig& config, std::ostream& log);
std::vector<std::filesystem::path> cmd_report(const RunConfig& config, std::ostream& log);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Full command line: `hydroscen <synth|train|generate|report> --config <path>
/// [--seed <n>] [--no-reorder]`. Errors go to `err`; returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hydroscen::cli
