// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "lidarfield/lidar_io.hpp"

namespace lidarfield {

using Cell = std::array<std::int64_t, 3>;

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept;
};

/// Sparse occupancy grid; cell(p) = floor((p - origin) / voxel).
class VoxelMap {
 public:
  VoxelMap(double voxel, const Vec3& origin = Vec3::Zero());

  double voxel() const { return voxel_; }
  const Vec3& origin() const { return origin_; }
  std::size_t occupied_count() const { return cells_.size(); }

  Cell cell_of(const Vec3& p) const;
  void insert(const Vec3& p);
  void insert_cell(const Cell& c) { cells_.insert(c); }
  bool occupied(const Cell& c) const { return cells_.count(c) != 0; }
  /// Occupied cells in lexicographic order.
  std::vector<Cell> sorted_cells() const;

 private:
  double voxel_;
  Vec3 origin_;
  std::unordered_set<Cell, CellHash> cells_;
};

inline constexpr double kDefaultVoxel = 0.05;

VoxelMap build_voxel_map(std::span<const PointCloud> world_clouds, double voxel,
                         const Vec3& origin = Vec3::Zero());

/// Grid traversal from origin along unit dir. Returns the distance to the
/// entry face of the first occupied cell, 0 when origin starts inside one.
std::optional<double> cast_ray(const VoxelMap& map, const Vec3& origin, const Vec3& dir, double t_max);

/// Header (voxel size, origin, count) followed by sorted cell indices.
void save_voxel_map(std::ostream& out, const VoxelMap& map);
VoxelMap load_voxel_map(std::istream& in);
void save_voxel_map(const std::string& path, const VoxelMap& map);
VoxelMap load_voxel_map(const std::string& path);

}  // namespace lidarfield
