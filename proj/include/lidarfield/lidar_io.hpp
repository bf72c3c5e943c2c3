// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarfield/types.hpp"

namespace lidarfield {

struct PointCloud {
  std::vector<Vec3> points;
  int frame_id = 0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Rigid sensor-to-world transform.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  /// Heading about the world z axis, radians.
  double yaw() const;

  static Pose from_yaw(double yaw_rad, const Vec3& translation);
};

struct FrameSplit {
  std::vector<int> train_ids;
  std::vector<int> test_ids;
  double sparsity = 0.0;
};

/// Decodes KITTI-style scan records (x, y, z, intensity as little-endian
/// float32). Intensity is dropped.
PointCloud parse_scan(std::span<const std::byte> blob, int frame_id = 0);

/// Inverse of parse_scan; intensity is written as 0.
std::vector<std::byte> encode_scan(const PointCloud& cloud);

PointCloud read_scan_file(const std::filesystem::path& path, int frame_id);
void write_scan_file(const std::filesystem::path& path, const PointCloud& cloud);

/// One pose per non-empty line: 12 numbers, row-major 3x4 [R | t].
std::vector<Pose> parse_poses(std::string_view text);
std::string format_poses(std::span<const Pose> poses);
std::vector<Pose> read_pose_file(const std::filesystem::path& path);

PointCloud to_world(const PointCloud& cloud, const Pose& pose);

/// Keeps points with |p - origin| <= r_max.
PointCloud range_filter(const PointCloud& cloud, const Vec3& origin, double r_max);

/// Group period m and test frames per group k for a sparsity value.
struct SparsityPattern {
  int test_per_group = 1;
  int group = 5;
};
SparsityPattern sparsity_pattern(double sparsity);

/// Periodic split: within each group of m frames the last k are test frames.
FrameSplit split_frames(int n_frames, double sparsity);

}  // namespace lidarfield
