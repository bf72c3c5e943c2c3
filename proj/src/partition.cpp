// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/partition.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace lidarfield {
namespace {

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

std::int64_t cell_of(double v, double cell) { return static_cast<std::int64_t>(std::floor(v / cell)); }

std::uint64_t pack_cell(std::int64_t x, std::int64_t y, std::int64_t z) {
  constexpr std::int64_t bias = 1 << 20;
  constexpr std::uint64_t mask = (1ULL << 21) - 1;
  return (static_cast<std::uint64_t>(x + bias) & mask) | ((static_cast<std::uint64_t>(y + bias) & mask) << 21) |
         ((static_cast<std::uint64_t>(z + bias) & mask) << 42);
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  }
};

const char* kind_name(ChildKind k) { return k == ChildKind::ground ? "ground" : "object"; }

void write_box(std::ostream& out, const char* kind, int id, const Aabb& b) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s %d %.17g %.17g %.17g %.17g %.17g %.17g\n", kind, id, b.min_corner.x(),
                b.min_corner.y(), b.min_corner.z(), b.max_corner.x(), b.max_corner.y(), b.max_corner.z());
  out << buf;
}

}  // namespace

LidarRay LidarRay::between(const Vec3& origin, const Vec3& endpoint) {
  LidarRay ray;
  ray.origin = origin;
  ray.endpoint = endpoint;
  ray.depth = (endpoint - origin).norm();
  if (!(ray.depth > 0.0)) throw ValidationError("ray endpoint coincides with its origin");
  ray.dir = (endpoint - origin) / ray.depth;
  return ray;
}

std::vector<ParentBlock> merge_overlapping_blocks(std::vector<ParentBlock> blocks, double merge_iou) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < blocks.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < blocks.size() && !merged; ++j) {
        if (iou(blocks[i].box, blocks[j].box) > merge_iou) {
          blocks[i].box = blocks[i].box.merged(blocks[j].box);
          blocks[i].frame_ids.insert(blocks[i].frame_ids.end(), blocks[j].frame_ids.begin(),
                                     blocks[j].frame_ids.end());
          std::sort(blocks[i].frame_ids.begin(), blocks[i].frame_ids.end());
          blocks.erase(blocks.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        }
      }
    }
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].block_id = static_cast<int>(i);
  return blocks;
}

std::vector<ParentBlock> build_parent_blocks(std::span<const PosedCloud> frames, double yaw_threshold_deg,
                                             double margin, double merge_iou) {
  std::vector<ParentBlock> blocks;
  if (frames.empty()) return blocks;
  const double threshold = yaw_threshold_deg * std::numbers::pi / 180.0;

  std::vector<std::vector<std::size_t>> groups{{0}};
  double turned = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    turned += std::abs(wrap_angle(frames[i].pose.yaw() - frames[i - 1].pose.yaw()));
    if (turned > threshold) {
      groups.emplace_back();
      turned = 0.0;
    }
    groups.back().push_back(i);
  }

  for (const auto& group : groups) {
    ParentBlock block;
    Aabb box;
    box.min_corner = box.max_corner = frames[group.front()].origin();
    for (std::size_t idx : group) {
      const PosedCloud& f = frames[idx];
      block.frame_ids.push_back(f.frame_id);
      box.expand(f.origin());
      for (const Vec3& p : f.world.points) box.expand(p);
    }
    block.box = inflate(box, margin);
    block.block_id = static_cast<int>(blocks.size());
    blocks.push_back(std::move(block));
  }
  return merge_overlapping_blocks(std::move(blocks), merge_iou);
}

GroundSplit extract_ground(const PointCloud& cloud, double cell, double h_thresh) {
  GroundSplit split;
  split.ground.frame_id = split.non_ground.frame_id = cloud.frame_id;
  std::unordered_map<std::uint64_t, double> lowest;
  std::vector<std::uint64_t> keys(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    keys[i] = pack_cell(cell_of(p.x(), cell), cell_of(p.y(), cell), 0);
    auto [it, inserted] = lowest.try_emplace(keys[i], p.z());
    if (!inserted) it->second = std::min(it->second, p.z());
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (p.z() - lowest[keys[i]] <= h_thresh) {
      split.ground.points.push_back(p);
      split.ground_indices.push_back(i);
    } else {
      split.non_ground.points.push_back(p);
      split.non_ground_indices.push_back(i);
    }
  }
  return split;
}

std::vector<std::vector<std::size_t>> cluster_regions(const PointCloud& cloud, double radius,
                                                      std::size_t min_points) {
  const std::size_t n = cloud.size();
  std::vector<std::array<std::int64_t, 3>> cells(n);
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = cloud.points[i];
    cells[i] = {cell_of(p.x(), radius), cell_of(p.y(), radius), cell_of(p.z(), radius)};
    grid[pack_cell(cells[i][0], cells[i][1], cells[i][2])].push_back(i);
  }

  const double r2 = radius * radius;
  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = cloud.points[i];
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(pack_cell(cells[i][0] + dx, cells[i][1] + dy, cells[i][2] + dz));
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j > i && (cloud.points[j] - p).squaredNorm() <= r2) sets.unite(i, j);
          }
        }
      }
    }
  }

  // Roots are the smallest member index, so iterating i in order emits
  // segments ordered by their first index.
  std::vector<std::vector<std::size_t>> by_root(n);
  for (std::size_t i = 0; i < n; ++i) by_root[sets.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> segments;
  for (auto& members : by_root) {
    if (!members.empty() && members.size() >= min_points) segments.push_back(std::move(members));
  }
  return segments;
}

std::vector<ChildRegion> build_child_regions(const PointCloud& ground, const PointCloud& non_ground,
                                             std::span<const std::vector<std::size_t>> segments,
                                             double min_thickness, double ground_tile) {
  std::vector<ChildRegion> children;
  std::map<std::pair<std::int64_t, std::int64_t>, Aabb> tiles;
  for (const Vec3& p : ground.points) {
    const auto key = std::make_pair(cell_of(p.x(), ground_tile), cell_of(p.y(), ground_tile));
    auto [it, inserted] = tiles.try_emplace(key, Aabb(p, p));
    if (!inserted) it->second.expand(p);
  }
  for (const auto& [key, box] : tiles) {
    children.push_back({pad_to_min_extent(box, min_thickness), static_cast<int>(children.size()), ChildKind::ground});
  }
  for (const auto& segment : segments) {
    if (segment.empty()) continue;
    Aabb box(non_ground.points[segment.front()], non_ground.points[segment.front()]);
    for (std::size_t idx : segment) box.expand(non_ground.points[idx]);
    children.push_back({pad_to_min_extent(box, min_thickness), static_cast<int>(children.size()), ChildKind::object});
  }
  return children;
}

void partition_block(ParentBlock& block, std::span<const PosedCloud> frames, const PartitionParams& params) {
  PointCloud fused;
  for (const PosedCloud& f : frames) {
    if (!std::binary_search(block.frame_ids.begin(), block.frame_ids.end(), f.frame_id)) continue;
    for (const Vec3& p : f.world.points) {
      if (block.box.contains(p)) fused.points.push_back(p);
    }
  }
  const GroundSplit split = extract_ground(fused, params.ground_cell, params.ground_height);
  const auto segments = cluster_regions(split.non_ground, params.cluster_radius, params.cluster_min_points);
  block.children = build_child_regions(split.ground, split.non_ground, segments, params.min_thickness,
                                       params.ground_tile);
  for (ChildRegion& child : block.children) child.box = clip(child.box, block.box);
}

std::vector<ParentBlock> build_hierarchy(std::span<const PosedCloud> frames, const PartitionParams& params) {
  auto blocks = build_parent_blocks(frames, params.yaw_threshold_deg, params.margin, params.merge_iou);
  for (ParentBlock& block : blocks) partition_block(block, frames, params);
  return blocks;
}

std::optional<int> owning_child(const Vec3& p, std::span<const ChildRegion> children) {
  const ChildRegion* best = nullptr;
  double best_volume = 0.0;
  for (const ChildRegion& child : children) {
    if (!child.box.contains(p)) continue;
    const double v = child.box.volume();
    if (!best || v < best_volume || (v == best_volume && child.segment_id < best->segment_id)) {
      best = &child;
      best_volume = v;
    }
  }
  if (!best) return std::nullopt;
  return best->segment_id;
}

std::vector<LidarRay> assign_rays(std::span<const PosedCloud> frames, const ParentBlock& parent) {
  std::vector<LidarRay> rays;
  for (const PosedCloud& f : frames) {
    if (!std::binary_search(parent.frame_ids.begin(), parent.frame_ids.end(), f.frame_id)) continue;
    for (const Vec3& p : f.world.points) {
      if ((p - f.origin()).squaredNorm() == 0.0) continue;
      LidarRay ray = LidarRay::between(f.origin(), p);
      ray.child_id = owning_child(p, parent.children);
      ray.frame_id = f.frame_id;
      ray.id = rays.size();
      rays.push_back(ray);
    }
  }
  return rays;
}

const ChildRegion* find_child(const ParentBlock& block, int segment_id) {
  for (const ChildRegion& c : block.children) {
    if (c.segment_id == segment_id) return &c;
  }
  return nullptr;
}

void write_hierarchy(std::ostream& out, std::span<const ParentBlock> blocks) {
  out << "# kind id min_x min_y min_z max_x max_y max_z\n";
  for (const ParentBlock& block : blocks) {
    write_box(out, "parent", block.block_id, block.box);
    out << "frames " << block.block_id;
    for (int id : block.frame_ids) out << ' ' << id;
    out << '\n';
    for (const ChildRegion& child : block.children) write_box(out, kind_name(child.kind), child.segment_id, child.box);
  }
}

std::vector<ParentBlock> read_hierarchy(std::istream& in) {
  std::vector<ParentBlock> blocks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind) || kind.front() == '#') continue;
    int id = 0;
    if (!(ss >> id)) throw FormatError("hierarchy line " + std::to_string(line_no) + ": missing id");
    if (kind == "frames") {
      if (blocks.empty() || blocks.back().block_id != id) {
        throw FormatError("hierarchy line " + std::to_string(line_no) + ": frames without matching parent");
      }
      int f = 0;
      while (ss >> f) blocks.back().frame_ids.push_back(f);
      continue;
    }
    Vec3 lo, hi;
    if (!(ss >> lo.x() >> lo.y() >> lo.z() >> hi.x() >> hi.y() >> hi.z())) {
      throw FormatError("hierarchy line " + std::to_string(line_no) + ": expected six coordinates");
    }
    Aabb box;
    try {
      box = Aabb(lo, hi);
    } catch (const ValidationError& e) {
      throw FormatError("hierarchy line " + std::to_string(line_no) + ": " + e.what());
    }
    if (kind == "parent") {
      blocks.push_back(ParentBlock{id, box, {}, {}});
    } else if (kind == "ground" || kind == "object") {
      if (blocks.empty()) throw FormatError("hierarchy line " + std::to_string(line_no) + ": child before parent");
      blocks.back().children.push_back({box, id, kind == "ground" ? ChildKind::ground : ChildKind::object});
    } else {
      throw FormatError("hierarchy line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
    }
  }
  return blocks;
}

}  // namespace lidarfield
