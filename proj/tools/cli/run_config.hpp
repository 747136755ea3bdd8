#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hydroscen/synth.hpp"
#include "hydroscen/train.hpp"

namespace hydroscen::cli {

/// Every path is absolute after parsing; relative entries resolve against the
/// directory holding the config file. Inputs left unset default to the file
/// names the earlier subcommands write under `output_dir`.
struct RunPaths {
  std::filesystem::path output_dir;
  std::filesystem::path forcing;
  std::filesystem::path history;
  std::filesystem::path ensemble_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path scenarios;
  /// Cached serial model; fitted from history when unset.
  std::optional<std::filesystem::path> serial_model;
  /// Plant productivity table; every plant weighs 1 when unset.
  std::optional<std::filesystem::path> productivity;
};

struct GenerateSettings {
  int n_scen = 30;
  bool reorder = true;
  bool diagonal_phi = false;
  double shrinkage = 0.1;
  int threads = 1;
};

struct RunConfig {
  std::uint64_t seed = 0;
  RunPaths paths;
  std::optional<SynthSpec> synth;
  int embedding_dim = 32;
  int hidden_dim = 64;
  TrainConfig train;
  GenerateSettings generate;
  std::vector<double> quantile_levels{0.10, 0.25, 0.60, 0.95};
};

/// Parses the JSON config. Throws ConfigError on malformed or invalid settings.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Replaces the run seed everywhere it is used.
void override_seed(RunConfig& config, std::uint64_t seed);

}  // namespace hydroscen::cli
