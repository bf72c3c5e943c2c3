// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/lidar_io.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <bit>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace lidarfield {
namespace {

static_assert(std::endian::native == std::endian::little,
              "scan records are little-endian float32");

constexpr std::size_t kRecordBytes = 16;

float read_f32(const std::byte* p) {
  float v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

void write_f32(std::byte* p, float v) { std::memcpy(p, &v, sizeof(v)); }

double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

double Pose::yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

Pose Pose::from_yaw(double yaw_rad, const Vec3& translation) {
  Pose p;
  const double c = std::cos(yaw_rad), s = std::sin(yaw_rad);
  p.rotation << c, -s, 0, s, c, 0, 0, 0, 1;
  p.translation = translation;
  return p;
}

PointCloud parse_scan(std::span<const std::byte> blob, int frame_id) {
  if (blob.size() % kRecordBytes != 0) {
    throw FormatError("scan length " + std::to_string(blob.size()) +
                      " is not a multiple of 16 bytes");
  }
  PointCloud cloud;
  cloud.frame_id = frame_id;
  const std::size_t n = blob.size() / kRecordBytes;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::byte* rec = blob.data() + i * kRecordBytes;
    const float x = read_f32(rec), y = read_f32(rec + 4), z = read_f32(rec + 8);
    const float intensity = read_f32(rec + 12);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(intensity)) {
      throw FormatError("non-finite value in scan record " + std::to_string(i));
    }
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

std::vector<std::byte> encode_scan(const PointCloud& cloud) {
  std::vector<std::byte> out(cloud.size() * kRecordBytes);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::byte* rec = out.data() + i * kRecordBytes;
    const Vec3& p = cloud.points[i];
    write_f32(rec, static_cast<float>(p.x()));
    write_f32(rec + 4, static_cast<float>(p.y()));
    write_f32(rec + 8, static_cast<float>(p.z()));
    write_f32(rec + 12, 0.0f);
  }
  return out;
}

PointCloud read_scan_file(const std::filesystem::path& path, int frame_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open scan file " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_scan(std::as_bytes(std::span<const char>(raw)), frame_id);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_scan_file(const std::filesystem::path& path, const PointCloud& cloud) {
  const auto bytes = encode_scan(cloud);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write scan file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Pose> parse_poses(std::string_view text) {
  std::vector<Pose> poses;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    std::vector<double> values;
    std::size_t i = 0;
    bool bad_token = false;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      double v = 0.0;
      const char* first = line.data() + i;
      const char* last = line.data() + j;
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v)) bad_token = true;
      values.push_back(v);
      i = j;
    }
    if (values.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (bad_token) throw FormatError("pose line " + std::to_string(line_no) + ": unparseable number");
    if (values.size() != 12) {
      throw FormatError("pose line " + std::to_string(line_no) + ": expected 12 numbers, got " +
                        std::to_string(values.size()));
    }
    Pose p;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) p.rotation(r, c) = values[r * 4 + c];
      p.translation[r] = values[r * 4 + 3];
    }
    const double err = orthonormality_error(p.rotation);
    if (err > 1e-3 || p.rotation.determinant() <= 0.0) {
      throw ValidationError("pose line " + std::to_string(line_no) +
                            ": rotation is not orthonormal (error " + std::to_string(err) + ")");
    }
    if (err > 1e-12) {
      Eigen::JacobiSVD<Mat3> svd(p.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
      p.rotation = svd.matrixU() * svd.matrixV().transpose();
    }
    poses.push_back(p);
    if (end == text.size()) break;
  }
  return poses;
}

std::string format_poses(std::span<const Pose> poses) {
  std::string out;
  char buf[64];
  for (const Pose& p : poses) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        const double v = c < 3 ? p.rotation(r, c) : p.translation[r];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        if (r != 0 || c != 0) out.push_back(' ');
        out += buf;
      }
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<Pose> read_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open pose file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_poses(ss.str());
}

PointCloud to_world(const PointCloud& cloud, const Pose& pose) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(pose.apply(p));
  return out;
}

PointCloud range_filter(const PointCloud& cloud, const Vec3& origin, double r_max) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  for (const Vec3& p : cloud.points) {
    if ((p - origin).norm() <= r_max) out.points.push_back(p);
  }
  return out;
}

SparsityPattern sparsity_pattern(double sparsity) {
  if (!(sparsity > 0.0 && sparsity < 1.0)) {
    throw ValidationError("sparsity must lie in (0, 1), got " + std::to_string(sparsity));
  }
  // Two-decimal values such as 0.33 and 0.67 stand for 1/3 and 2/3.
  for (int m = 2; m <= 100; ++m) {
    const int k = static_cast<int>(std::lround(sparsity * m));
    if (k <= 0 || k >= m) continue;
    if (std::abs(sparsity - static_cast<double>(k) / m) <= 0.005) return {k, m};
  }
  throw ValidationError("sparsity " + std::to_string(sparsity) +
                        " is not expressible as k test frames per group of m");
}

FrameSplit split_frames(int n_frames, double sparsity) {
  const SparsityPattern pattern = sparsity_pattern(sparsity);
  FrameSplit split;
  split.sparsity = sparsity;
  for (int i = 0; i < n_frames; ++i) {
    if (i % pattern.group >= pattern.group - pattern.test_per_group) {
      split.test_ids.push_back(i);
    } else {
      split.train_ids.push_back(i);
    }
  }
  return split;
}

}  // namespace lidarfield
