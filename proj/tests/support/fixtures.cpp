#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace hydroscen::testing {

ModelParams random_model(const ModelConfig& config, std::uint64_t seed, double scale) {
  ModelParams p = ModelParams::zeros(config);
  Rng rng(seed);
  p.for_each_tensor([&](const char* name, auto& t) {
    const bool nonneg = std::string(name) == "w_in_p";
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double u = rng.uniform();
      t.data()[i] = nonneg ? scale * u : scale * (2.0 * u - 1.0);
    }
  });
  return p;
}

ModelInput random_input(int months, int precip_cells, int temp_cells, std::uint64_t seed) {
  Rng rng(seed);
  ModelInput in;
  in.months = month_sequence(YearMonth{2000, 1}, months);
  in.precip.resize(months, precip_cells);
  in.temp.resize(months, temp_cells);
  for (int t = 0; t < months; ++t) {
    for (int c = 0; c < precip_cells; ++c) in.precip(t, c) = std::max(0.0, rng.normal() + 0.5);
    for (int c = 0; c < temp_cells; ++c) in.temp(t, c) = rng.normal();
  }
  return in;
}

ForcingSeries make_forcing(YearMonth start, int months, GridShape grid, std::uint64_t seed) {
  Rng rng(seed);
  ForcingSeries f;
  f.months = month_sequence(start, months);
  f.grid = grid;
  f.mask.assign(grid.cells(), true);
  f.precip.resize(months, grid.cells());
  f.temp.resize(months, grid.cells());
  for (int t = 0; t < months; ++t) {
    for (int c = 0; c < grid.cells(); ++c) {
      f.precip(t, c) = 100.0 * rng.uniform();
      f.temp(t, c) = 20.0 + 3.0 * rng.normal();
    }
  }
  return f;
}

DischargeHistory make_history(const std::vector<YearMonth>& months, int plants, std::uint64_t seed) {
  Rng rng(seed);
  DischargeHistory h;
  h.months = months;
  for (int p = 0; p < plants; ++p) h.plants.push_back("P" + std::to_string(p + 1));
  h.values.resize(static_cast<Eigen::Index>(months.size()), plants);
  for (Eigen::Index t = 0; t < h.values.rows(); ++t)
    for (int p = 0; p < plants; ++p) h.values(t, p) = 500.0 * std::exp(0.3 * rng.normal());
  return h;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("hydroscen_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace hydroscen::testing
