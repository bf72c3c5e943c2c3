// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/scene.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace lidarfield {

namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double number(std::string_view tok, int line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw FormatError("scene line " + std::to_string(line_no) + ": bad number '" + std::string(tok) + "'");
  }
  return v;
}

Aabb make_box(const Vec3& lo, const Vec3& hi, int line_no) {
  if (!(lo.array() <= hi.array()).all())
    throw FormatError("scene line " + std::to_string(line_no) + ": min corner exceeds max corner");
  return Aabb(lo, hi);
}

}  // namespace

Scene parse_scene(std::string_view text) {
  Scene scene;
  int line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tok = tokenize(line);
    if (tok.empty()) continue;
    if (tok.back() == "opaque") {
      tok.pop_back();
    }
    const std::string where = "scene line " + std::to_string(line_no) + ": ";
    if (tok[0] == "box") {
      if (tok.size() != 7) throw FormatError(where + "box needs 6 numbers");
      const Vec3 lo(number(tok[1], line_no), number(tok[2], line_no), number(tok[3], line_no));
      const Vec3 hi(number(tok[4], line_no), number(tok[5], line_no), number(tok[6], line_no));
      scene.primitives.push_back(make_box(lo, hi, line_no));
    } else if (tok[0] == "plane") {
      if (tok.size() != 7) throw FormatError(where + "plane needs an axis and 5 numbers");
      int axis = -1;
      if (tok[1] == "x") axis = 0;
      if (tok[1] == "y") axis = 1;
      if (tok[1] == "z") axis = 2;
      if (axis < 0) throw FormatError(where + "plane axis must be x, y or z");
      const double offset = number(tok[2], line_no);
      const int u = axis == 0 ? 1 : 0;
      const int v = axis == 2 ? 1 : 2;
      Vec3 lo, hi;
      lo[axis] = hi[axis] = offset;
      lo[u] = number(tok[3], line_no);
      lo[v] = number(tok[4], line_no);
      hi[u] = number(tok[5], line_no);
      hi[v] = number(tok[6], line_no);
      scene.primitives.push_back(make_box(lo, hi, line_no));
    } else {
      throw FormatError(where + "unknown primitive '" + std::string(tok[0]) + "'");
    }
  }
  if (scene.primitives.empty()) throw FormatError("scene has no primitives");
  return scene;
}

Scene read_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scene file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

void BeamPattern::validate() const {
  if (azimuth_beams < 1 || elevation_beams < 1) throw ConfigError("beam counts must be >= 1");
  if (!(elevation_min_deg <= elevation_max_deg) || elevation_min_deg < -90.0 || elevation_max_deg > 90.0)
    throw ConfigError("elevation range must satisfy -90 <= min <= max <= 90");
  if (!(max_range > 0.0)) throw ConfigError("max_range must be positive");
}

std::vector<Vec3> beam_directions(const BeamPattern& pattern) {
  pattern.validate();
  constexpr double deg = std::numbers::pi / 180.0;
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(pattern.azimuth_beams) * pattern.elevation_beams);
  for (int e = 0; e < pattern.elevation_beams; ++e) {
    const double frac = pattern.elevation_beams == 1 ? 0.5 : static_cast<double>(e) / (pattern.elevation_beams - 1);
    const double elev =
        (pattern.elevation_min_deg + frac * (pattern.elevation_max_deg - pattern.elevation_min_deg)) * deg;
    for (int a = 0; a < pattern.azimuth_beams; ++a) {
      const double az = 2.0 * std::numbers::pi * a / pattern.azimuth_beams;
      dirs.emplace_back(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
    }
  }
  return dirs;
}

void Trajectory::validate() const {
  if (frames < 1) throw ConfigError("trajectory needs at least one frame");
  if (!start.allFinite() || !end.allFinite() || !std::isfinite(yaw_deg))
    throw ConfigError("trajectory values must be finite");
}

std::vector<Pose> trajectory_poses(const Trajectory& traj) {
  traj.validate();
  std::vector<Pose> poses;
  const double yaw = traj.yaw_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < traj.frames; ++i) {
    const double s = traj.frames == 1 ? 0.0 : static_cast<double>(i) / (traj.frames - 1);
    poses.push_back(Pose::from_yaw(yaw, traj.start + s * (traj.end - traj.start)));
  }
  return poses;
}

std::optional<double> first_hit(const Scene& scene, const Vec3& origin, const Vec3& dir, double max_range) {
  std::optional<double> best;
  for (const Aabb& box : scene.primitives) {
    const auto hit = ray_aabb_intersect(origin, dir, box);
    if (!hit || hit->t_enter > max_range) continue;
    if (!best || hit->t_enter < *best) best = hit->t_enter;
  }
  return best;
}

PointCloud simulate_scan(const Scene& scene, const Pose& pose, const BeamPattern& pattern, int frame_id, Rng* noise,
                         double range_noise) {
  PointCloud cloud;
  cloud.frame_id = frame_id;
  for (const Vec3& d : beam_directions(pattern)) {
    const auto hit = first_hit(scene, pose.translation, pose.rotation * d, pattern.max_range);
    if (!hit || *hit <= 0.0) continue;
    double range = *hit;
    if (noise && range_noise > 0.0) range += range_noise * noise->normal();
    cloud.points.push_back(range * d);
  }
  return cloud;
}

}  // namespace lidarfield
