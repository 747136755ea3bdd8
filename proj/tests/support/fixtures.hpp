#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hydroscen/ingest.hpp"
#include "hydroscen/netcore.hpp"
#include "hydroscen/random.hpp"

namespace hydroscen::testing {

/// Every tensor filled uniformly in [-scale, scale]; w_in_p in [0, scale].
ModelParams random_model(const ModelConfig& config, std::uint64_t seed, double scale = 0.5);

/// Standard-normal precip (clamped at 0) and temp for `months` months.
ModelInput random_input(int months, int precip_cells, int temp_cells, std::uint64_t seed);

/// Forcing on a rows x cols grid with every cell inside the mask.
ForcingSeries make_forcing(YearMonth start, int months, GridShape grid, std::uint64_t seed);

/// Positive discharge aligned with `months`.
DischargeHistory make_history(const std::vector<YearMonth>& months, int plants, std::uint64_t seed);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hydroscen::testing
