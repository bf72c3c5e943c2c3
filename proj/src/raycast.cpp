// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "lidarfield/types.hpp"

namespace lidarfield {

namespace {
constexpr const char* kMagic = "lidarfield-voxels";
constexpr int kVersion = 1;
}  // namespace

std::size_t CellHash::operator()(const Cell& c) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::int64_t v : c) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

VoxelMap::VoxelMap(double voxel, const Vec3& origin) : voxel_(voxel), origin_(origin) {
  if (!(voxel > 0.0) || !std::isfinite(voxel)) throw ValidationError("voxel size must be positive");
}

Cell VoxelMap::cell_of(const Vec3& p) const {
  Cell c;
  for (int a = 0; a < 3; ++a) c[a] = static_cast<std::int64_t>(std::floor((p[a] - origin_[a]) / voxel_));
  return c;
}

void VoxelMap::insert(const Vec3& p) { cells_.insert(cell_of(p)); }

std::vector<Cell> VoxelMap::sorted_cells() const {
  std::vector<Cell> out(cells_.begin(), cells_.end());
  std::sort(out.begin(), out.end());
  return out;
}

VoxelMap build_voxel_map(std::span<const PointCloud> world_clouds, double voxel, const Vec3& origin) {
  VoxelMap map(voxel, origin);
  for (const PointCloud& c : world_clouds)
    for (const Vec3& p : c.points) map.insert(p);
  return map;
}

std::optional<double> cast_ray(const VoxelMap& map, const Vec3& origin, const Vec3& dir, double t_max) {
  Cell cell = map.cell_of(origin);
  if (map.occupied(cell)) return 0.0;
  if (map.occupied_count() == 0) return std::nullopt;

  const double v = map.voxel();
  std::array<int, 3> step{};
  for (int a = 0; a < 3; ++a) step[a] = dir[a] > 0 ? 1 : (dir[a] < 0 ? -1 : 0);

  // Parameter at which the ray crosses the next boundary on each axis. Each
  // one is recomputed from the boundary coordinate so errors do not accumulate.
  const auto boundary_t = [&](int a) {
    if (step[a] == 0) return std::numeric_limits<double>::infinity();
    const double plane = map.origin()[a] + static_cast<double>(cell[a] + (step[a] > 0 ? 1 : 0)) * v;
    return (plane - origin[a]) / dir[a];
  };
  std::array<double, 3> next{boundary_t(0), boundary_t(1), boundary_t(2)};

  while (true) {
    int a = 0;
    if (next[1] < next[a]) a = 1;
    if (next[2] < next[a]) a = 2;
    const double t = std::max(next[a], 0.0);
    if (!(t <= t_max)) return std::nullopt;
    cell[a] += step[a];
    if (map.occupied(cell)) return t;
    next[a] = boundary_t(a);
  }
}

void save_voxel_map(std::ostream& out, const VoxelMap& map) {
  const auto cells = map.sorted_cells();
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s %d\nvoxel %.17g\norigin %.17g %.17g %.17g\ncount %zu\n", kMagic, kVersion,
                map.voxel(), map.origin().x(), map.origin().y(), map.origin().z(), cells.size());
  out << buf;
  for (const Cell& c : cells) out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
}

VoxelMap load_voxel_map(std::istream& in) {
  std::string magic, key;
  int version = 0;
  double voxel = 0.0;
  Vec3 origin;
  std::size_t count = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw FormatError("voxel map: bad header");
  if (version != kVersion)
    throw FormatError("voxel map: version " + std::to_string(version) + ", expected " + std::to_string(kVersion));
  if (!(in >> key >> voxel) || key != "voxel") throw FormatError("voxel map: missing voxel size");
  if (!(in >> key >> origin.x() >> origin.y() >> origin.z()) || key != "origin")
    throw FormatError("voxel map: missing origin");
  if (!(in >> key >> count) || key != "count") throw FormatError("voxel map: missing count");
  VoxelMap map(voxel, origin);
  for (std::size_t i = 0; i < count; ++i) {
    Cell c;
    if (!(in >> c[0] >> c[1] >> c[2])) throw FormatError("voxel map: truncated at cell " + std::to_string(i));
    map.insert_cell(c);
  }
  return map;
}

void save_voxel_map(const std::string& path, const VoxelMap& map) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  save_voxel_map(out, map);
}

VoxelMap load_voxel_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return load_voxel_map(in);
}

}  // namespace lidarfield
