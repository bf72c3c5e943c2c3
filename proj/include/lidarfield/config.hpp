// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "lidarfield/inference.hpp"
#include "lidarfield/partition.hpp"
#include "lidarfield/scene.hpp"
#include "lidarfield/trainer.hpp"

namespace lidarfield {

/// Flat "key = value" lines grouped under "[section]" headers. Keys are
/// returned as "section.key". '#' and ';' start comments.
std::map<std::string, std::string> parse_ini(std::string_view text);

struct RunConfig {
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;

  // Dataset. Empty paths default to <output_dir>/scans and <output_dir>/poses.txt.
  std::filesystem::path scans_dir;
  std::filesystem::path pose_file;
  std::filesystem::path scene_file;
  double max_range = 50.0;
  double sparsity = 0.33;

  BeamPattern beams;
  Trajectory trajectory;
  double range_noise = 0.0;

  PartitionParams partition;
  TrainConfig train;
  InferenceConfig inference;

  double voxel = 0.05;
  double tau = 0.2;
  /// Evaluate on training frames instead of held-out frames.
  bool eval_on_train = false;

  std::filesystem::path scans_path() const;
  std::filesystem::path poses_path() const;
  std::filesystem::path hierarchy_path() const { return output_dir / "hierarchy.txt"; }
  std::filesystem::path voxel_path() const { return output_dir / "voxels.txt"; }
  std::filesystem::path checkpoint_path(int block_id) const;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Unknown keys are rejected. Relative paths resolve against base_dir.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace lidarfield
