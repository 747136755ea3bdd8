#include "cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hydroscen/errors.hpp"

namespace hydroscen::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

YearRange year_range(const json& j, const char* key) {
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2) throw ConfigError(std::string("train.") + key + " must be [first, last]");
  return YearRange{r[0].get<int>(), r[1].get<int>()};
}

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + section);
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, "config", {"seed", "paths", "synth", "model", "train", "generate", "quantiles"});
    RunConfig c;
    c.seed = j.value("seed", std::uint64_t{0});

    const json paths = j.value("paths", json::object());
    check_keys(paths, "paths",
               {"output_dir", "forcing", "history", "ensemble_dir", "checkpoint", "scenarios", "serial_model",
                "productivity"});
    auto& p = c.paths;
    p.output_dir = resolve(base_dir, paths.value("output_dir", std::string("out")));
    auto input = [&](const char* key, const fs::path& fallback) {
      return paths.contains(key) ? resolve(base_dir, paths[key].get<std::string>()) : fallback;
    };
    p.forcing = input("forcing", p.output_dir / "forcing.csv");
    p.history = input("history", p.output_dir / "discharge.csv");
    p.ensemble_dir = input("ensemble_dir", p.output_dir / "ensemble");
    p.checkpoint = input("checkpoint", p.output_dir / "checkpoint.json");
    p.scenarios = input("scenarios", p.output_dir / "scenarios.csv");
    if (paths.contains("serial_model")) p.serial_model = resolve(base_dir, paths["serial_model"].get<std::string>());
    if (paths.contains("productivity")) p.productivity = resolve(base_dir, paths["productivity"].get<std::string>());

    if (j.contains("synth")) c.synth = synth_spec_from_json(j["synth"].dump());

    if (j.contains("model")) {
      const auto& m = j["model"];
      check_keys(m, "model", {"embedding_dim", "hidden_dim"});
      c.embedding_dim = m.value("embedding_dim", c.embedding_dim);
      c.hidden_dim = m.value("hidden_dim", c.hidden_dim);
      if (c.embedding_dim < 1 || c.hidden_dim < 1) throw ConfigError("model sizes must be positive");
    }

    if (j.contains("quantiles")) c.quantile_levels = j["quantiles"].get<std::vector<double>>();
    try {
      QuantileSet{c.quantile_levels};
    } catch (const std::exception& e) {
      throw ConfigError(std::string("quantiles: ") + e.what());
    }

    auto& t = c.train;
    if (j.contains("train")) {
      const auto& tj = j["train"];
      check_keys(tj, "train",
                 {"learning_rate", "max_epochs", "patience", "dropout", "train_years", "valid_years", "beta1", "beta2",
                  "epsilon"});
      t.learning_rate = tj.value("learning_rate", t.learning_rate);
      t.max_epochs = tj.value("max_epochs", t.max_epochs);
      t.patience = tj.value("patience", t.patience);
      t.dropout_rate = tj.value("dropout", t.dropout_rate);
      if (tj.contains("train_years")) t.train_years = year_range(tj, "train_years");
      if (tj.contains("valid_years")) t.valid_years = year_range(tj, "valid_years");
      t.beta1 = tj.value("beta1", t.beta1);
      t.beta2 = tj.value("beta2", t.beta2);
      t.epsilon = tj.value("epsilon", t.epsilon);
    }
    t.quantile_levels = c.quantile_levels;
    t.seed = c.seed;

    if (j.contains("generate")) {
      const auto& g = j["generate"];
      check_keys(g, "generate", {"n_scen", "reorder", "diagonal_phi", "shrinkage", "threads"});
      auto& s = c.generate;
      s.n_scen = g.value("n_scen", s.n_scen);
      s.reorder = g.value("reorder", s.reorder);
      s.diagonal_phi = g.value("diagonal_phi", s.diagonal_phi);
      s.shrinkage = g.value("shrinkage", s.shrinkage);
      s.threads = g.value("threads", s.threads);
      if (s.n_scen < 1) throw ConfigError("generate.n_scen must be at least 1");
      if (s.threads < 1) throw ConfigError("generate.threads must be at least 1");
      if (!(s.shrinkage >= 0.0 && s.shrinkage < 1.0)) throw ConfigError("generate.shrinkage must be in [0, 1)");
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const fs::path base = fs::absolute(path).parent_path();
  return parse_run_config(ss.str(), base);
}

void override_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.train.seed = seed;
}

}  // namespace hydroscen::cli
