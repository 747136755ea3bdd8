#include "hydroscen/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hydroscen/errors.hpp"

namespace hydroscen {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

template <typename Tensor>
ordered_json tensor_to_json(const Tensor& t) {
  ordered_json j;
  j["rows"] = t.rows();
  j["cols"] = t.cols();
  std::vector<double> data;
  data.reserve(t.size());
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index k = 0; k < t.cols(); ++k) data.push_back(t(i, k));
  j["data"] = std::move(data);
  return j;
}

template <typename Tensor>
void tensor_from_json(const json& j, Tensor& t, const char* name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows != t.rows() || cols != t.cols())
    throw DataError(std::string("checkpoint tensor '") + name + "' has the wrong shape");
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError(std::string("checkpoint tensor '") + name + "' has the wrong length");
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) t(i, k) = data[i * cols + k].get<double>();
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const json& j, int n, const char* name) {
  auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != n) throw DataError(std::string("checkpoint '") + name + "' has the wrong length");
  return Eigen::Map<Eigen::VectorXd>(v.data(), n);
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  ordered_json j;
  j["format"] = "hydroscen-checkpoint";
  j["version"] = 1;
  const ModelConfig& m = c.params.config;
  j["config"] = {{"n_precip_cells", m.n_precip_cells}, {"n_temp_cells", m.n_temp_cells},
                 {"embedding_dim", m.embedding_dim},   {"hidden_dim", m.hidden_dim},
                 {"n_plants", m.n_plants}};
  j["plants"] = c.plants;
  j["quantile_levels"] = c.quantile_levels;
  std::vector<int> mask(c.norm.mask.begin(), c.norm.mask.end());
  j["grid"] = {{"rows", c.norm.grid.rows}, {"cols", c.norm.grid.cols}, {"mask", mask}};
  ordered_json tensors;
  c.params.for_each_tensor([&](const char* name, const auto& t) { tensors[name] = tensor_to_json(t); });
  j["tensors"] = std::move(tensors);
  j["norm_stats"] = {{"precip_mean", to_vec(c.norm.precip_mean)},
                     {"precip_std", to_vec(c.norm.precip_std)},
                     {"temp_mean", to_vec(c.norm.temp_mean)},
                     {"temp_std", to_vec(c.norm.temp_std)}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "hydroscen-checkpoint" || j.at("version").get<int>() != 1)
      throw DataError("not a version 1 hydroscen checkpoint");
    Checkpoint c;
    const auto& cfg = j.at("config");
    ModelConfig m;
    m.n_precip_cells = cfg.at("n_precip_cells").get<int>();
    m.n_temp_cells = cfg.at("n_temp_cells").get<int>();
    m.embedding_dim = cfg.at("embedding_dim").get<int>();
    m.hidden_dim = cfg.at("hidden_dim").get<int>();
    m.n_plants = cfg.at("n_plants").get<int>();
    m.validate();
    c.params = ModelParams::zeros(m);
    c.plants = j.at("plants").get<std::vector<std::string>>();
    if (static_cast<int>(c.plants.size()) != m.n_plants) throw DataError("checkpoint plant list does not match n_plants");
    c.quantile_levels = j.at("quantile_levels").get<std::vector<double>>();

    const auto& grid = j.at("grid");
    c.norm.grid = GridShape{grid.at("rows").get<int>(), grid.at("cols").get<int>()};
    const auto mask = grid.at("mask").get<std::vector<int>>();
    if (static_cast<int>(mask.size()) != c.norm.grid.cells()) throw DataError("checkpoint mask does not match grid");
    c.norm.mask.assign(mask.begin(), mask.end());
    int active = 0;
    for (bool b : c.norm.mask) active += b ? 1 : 0;
    if (active != m.n_precip_cells || active != m.n_temp_cells)
      throw DataError("checkpoint mask does not match the model input size");

    const auto& tensors = j.at("tensors");
    c.params.for_each_tensor([&](const char* name, auto& t) { tensor_from_json(tensors.at(name), t, name); });

    const auto& ns = j.at("norm_stats");
    const int cells = c.norm.grid.cells();
    c.norm.precip_mean = from_vec(ns.at("precip_mean"), cells, "precip_mean");
    c.norm.precip_std = from_vec(ns.at("precip_std"), cells, "precip_std");
    c.norm.temp_mean = from_vec(ns.at("temp_mean"), cells, "temp_mean");
    c.norm.temp_std = from_vec(ns.at("temp_std"), cells, "temp_std");
    if ((c.params.w_in_p.array() < 0.0).any()) throw DataError("checkpoint violates w_in_p >= 0");
    if (!c.params.all_finite()) throw DataError("checkpoint contains non-finite parameters");
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << checkpoint_to_json(c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

std::string content_id(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hydroscen
