#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hydroscen/ingest.hpp"
#include "hydroscen/netcore.hpp"

namespace hydroscen {

/// Everything needed to run a trained model on new forcing.
///
/// On disk this is a JSON document:
///   format            "hydroscen-checkpoint", version 1
///   config            model sizes
///   plants            plant ids, in head-output order
///   quantile_levels   levels the model was trained on
///   grid              {rows, cols, mask: [0/1 ...] row-major}
///   tensors           name -> {rows, cols, data: row-major doubles}
///   norm_stats        precip_mean, precip_std, temp_mean, temp_std (per grid cell)
/// Doubles are written in shortest round-trip form, so save/load is lossless.
struct Checkpoint {
  ModelParams params;
  NormStats norm;
  std::vector<std::string> plants;
  std::vector<double> quantile_levels;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Short stable content hash (FNV-1a 64, hex) used as a provenance id.
std::string content_id(const std::string& bytes);

}  // namespace hydroscen
