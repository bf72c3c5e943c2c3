// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lidarfield/geometry.hpp"
#include "lidarfield/lidar_io.hpp"
#include "lidarfield/random.hpp"

namespace lidarfield {

/// Opaque axis-aligned primitives. A plane is stored as a box of zero
/// thickness along its normal axis.
struct Scene {
  std::vector<Aabb> primitives;
};

/// Line format, '#' starts a comment:
///   box  <min x y z> <max x y z> [opaque]
///   plane <x|y|z> <offset> <lo u v> <hi u v> [opaque]
/// where (u, v) are the two remaining axes in x, y, z order.
Scene parse_scene(std::string_view text);
Scene read_scene_file(const std::filesystem::path& path);

/// Spinning LiDAR: elevation rows evenly spaced over [min, max], azimuth
/// columns evenly spaced over a full turn.
struct BeamPattern {
  int azimuth_beams = 100;
  int elevation_beams = 64;
  double elevation_min_deg = -30.0;
  double elevation_max_deg = 10.0;
  double max_range = 50.0;

  void validate() const;
};

/// Unit directions in the sensor frame, row-major over (elevation, azimuth).
std::vector<Vec3> beam_directions(const BeamPattern& pattern);

/// Straight constant-heading path sampled at n evenly spaced poses.
struct Trajectory {
  int frames = 30;
  Vec3 start = Vec3(-6.0, 0.0, 1.8);
  Vec3 end = Vec3(6.0, 0.0, 1.8);
  double yaw_deg = 0.0;

  void validate() const;
};

std::vector<Pose> trajectory_poses(const Trajectory& traj);

/// Closest primitive hit along a unit ray within max_range.
std::optional<double> first_hit(const Scene& scene, const Vec3& origin, const Vec3& dir, double max_range);

/// Sensor-frame scan. Beams that miss everything are omitted. When noise is
/// given, each range gets N(0, range_noise^2) added.
PointCloud simulate_scan(const Scene& scene, const Pose& pose, const BeamPattern& pattern, int frame_id,
                         Rng* noise = nullptr, double range_noise = 0.0);

}  // namespace lidarfield
