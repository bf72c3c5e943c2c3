// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lidarfield/config.hpp"
#include "lidarfield/metrics.hpp"

namespace lidarfield {

enum class EvalMethod { two_step, one_step, raycast };

/// "pcnerf-two-step", "pcnerf-one-step" or "raycast"; ConfigError otherwise.
EvalMethod parse_method(const std::string& name);
std::string method_name(EvalMethod method);

/// Number of frames in the pose file; ConfigError when the scan directory
/// has no scans.
int count_frames(const RunConfig& cfg);

FrameSplit dataset_split(const RunConfig& cfg);

/// World-frame, range-filtered scans for the given frame ids.
std::vector<PosedCloud> load_frames(const RunConfig& cfg, std::span<const int> ids);

/// Block whose box holds p (smallest volume first), else the one with the
/// nearest centre.
const ParentBlock& block_for(std::span<const ParentBlock> blocks, const Vec3& p);

void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

void cmd_make_scene(const RunConfig& cfg, std::ostream& log);
std::vector<ParentBlock> cmd_partition(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, bool resume, std::ostream& log);
void cmd_raycast_build(const RunConfig& cfg, std::ostream& log);

struct EvalOutcome {
  std::vector<MetricsReport> frames;
  MapReport map;
  bool has_map = false;
};

/// Synthesizes every evaluation frame and writes one PLY per frame.
/// With metrics set, also writes metrics_<method>.csv and map_<method>.csv.
EvalOutcome cmd_synthesize(const RunConfig& cfg, EvalMethod method, bool metrics, std::ostream& log);

inline EvalOutcome cmd_eval(const RunConfig& cfg, EvalMethod method, std::ostream& log) {
  return cmd_synthesize(cfg, method, true, log);
}

}  // namespace lidarfield
