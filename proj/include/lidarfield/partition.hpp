// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lidarfield/geometry.hpp"
#include "lidarfield/lidar_io.hpp"

namespace lidarfield {

enum class ChildKind { ground, object };

struct ChildRegion {
  Aabb box;
  int segment_id = 0;
  ChildKind kind = ChildKind::object;
};

struct ParentBlock {
  int block_id = 0;
  Aabb box;
  std::vector<int> frame_ids;
  std::vector<ChildRegion> children;
};

/// A world-frame scan together with the pose it was captured from.
struct PosedCloud {
  int frame_id = 0;
  Pose pose;
  PointCloud world;

  const Vec3& origin() const { return pose.translation; }
};

/// One LiDAR return as a supervised ray.
struct LidarRay {
  Vec3 origin = Vec3::Zero();
  Vec3 endpoint = Vec3::Zero();
  Vec3 dir = Vec3::UnitX();
  double depth = 0.0;
  std::optional<int> child_id;
  int frame_id = 0;
  std::size_t id = 0;

  /// origin and endpoint must be distinct.
  static LidarRay between(const Vec3& origin, const Vec3& endpoint);
};

struct PartitionParams {
  double yaw_threshold_deg = 30.0;
  double margin = 1.0;
  double merge_iou = 0.5;
  double ground_cell = 1.0;
  double ground_height = 0.3;
  double cluster_radius = 0.5;
  std::size_t cluster_min_points = 10;
  double min_thickness = 0.2;
  double ground_tile = 10.0;
};

/// Splits the trajectory into blocks at cumulative heading changes above the
/// threshold, boxes each block (points and sensor origins, grown by margin)
/// and merges blocks whose IoU exceeds merge_iou.
std::vector<ParentBlock> build_parent_blocks(std::span<const PosedCloud> frames, double yaw_threshold_deg,
                                             double margin, double merge_iou);

/// Repeatedly merges the first pair of blocks with IoU above the threshold.
std::vector<ParentBlock> merge_overlapping_blocks(std::vector<ParentBlock> blocks, double merge_iou);

struct GroundSplit {
  PointCloud ground;
  PointCloud non_ground;
  std::vector<std::size_t> ground_indices;
  std::vector<std::size_t> non_ground_indices;
};

/// Per xy column of size cell, points at most h_thresh above the column's
/// lowest point are ground.
GroundSplit extract_ground(const PointCloud& cloud, double cell, double h_thresh);

/// Fixed-radius connected components. Components smaller than min_points are
/// dropped. Each segment is sorted ascending and segments are ordered by
/// their first index.
std::vector<std::vector<std::size_t>> cluster_regions(const PointCloud& cloud, double radius,
                                                      std::size_t min_points);

/// Ground is tiled into ground_tile x ground_tile footprints (world-aligned);
/// each tile and each object segment becomes one child. Ground children get
/// the lower segment ids.
std::vector<ChildRegion> build_child_regions(const PointCloud& ground, const PointCloud& non_ground,
                                             std::span<const std::vector<std::size_t>> segments,
                                             double min_thickness, double ground_tile);

/// Runs ground extraction, clustering and child construction on the fused
/// points of the block's frames; children are clipped to the parent box.
void partition_block(ParentBlock& block, std::span<const PosedCloud> frames, const PartitionParams& params);

/// Full hierarchy for a set of training frames.
std::vector<ParentBlock> build_hierarchy(std::span<const PosedCloud> frames, const PartitionParams& params);

/// Smallest-volume child containing p; ties go to the smaller segment id.
std::optional<int> owning_child(const Vec3& p, std::span<const ChildRegion> children);

/// One ray per point of the block's frames.
std::vector<LidarRay> assign_rays(std::span<const PosedCloud> frames, const ParentBlock& parent);

const ChildRegion* find_child(const ParentBlock& block, int segment_id);

/// Plain-text sidecar: "parent|ground|object <id> <min xyz> <max xyz>" per
/// box, plus "frames <block id> <ids...>" after each parent line.
void write_hierarchy(std::ostream& out, std::span<const ParentBlock> blocks);
std::vector<ParentBlock> read_hierarchy(std::istream& in);

}  // namespace lidarfield
