// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lidarfield/lidar_io.hpp"

namespace lidarfield {

/// Exact nearest-neighbour queries over a fixed point set.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  /// Euclidean distance to the closest stored point. Tree must be non-empty.
  double nearest_distance(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, double& best_sq) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
};

/// For each point of from, the distance to its nearest neighbour in to.
std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to);

struct DepthScores {
  std::optional<double> dep_err;
  std::optional<double> dep_acc;
  double valid_fraction = 0.0;
  std::size_t valid = 0;
  std::size_t total = 0;
};

/// Errors over rays with a prediction only; |error| <= tau counts as accurate.
DepthScores depth_metrics(std::span<const std::optional<double>> pred, std::span<const double> truth, double tau);

struct ChamferResult {
  double ab = 0.0;
  double ba = 0.0;
  double cd = 0.0;  // (ab + ba) / 2
};

ChamferResult chamfer(const PointCloud& a, const PointCloud& b);

/// Harmonic mean of precision (a within tau of b) and recall (b within tau of a).
double f_score(const PointCloud& a, const PointCloud& b, double tau);

/// chamfer and f_score from precomputed nearest-neighbour distances.
ChamferResult chamfer_from(std::span<const double> ab, std::span<const double> ba);
double f_score_from(std::span<const double> ab, std::span<const double> ba, double tau);

struct MetricsReport {
  int frame_id = 0;
  std::optional<double> dep_err;
  std::optional<double> dep_acc_02;
  std::optional<double> cd;
  std::optional<double> f_02;
  double valid_fraction = 0.0;
};

struct MapReport {
  double acc = 0.0;
  double comp = 0.0;
  double map_cd = 0.0;
  double map_f_02 = 0.0;
};

inline constexpr double kAccuracyThreshold = 0.2;

/// Per-frame report; cloud metrics are absent when the synthesized cloud is empty.
MetricsReport frame_metrics(int frame_id, std::span<const std::optional<double>> pred,
                            std::span<const double> truth, const PointCloud& synthesized, const PointCloud& real,
                            double tau = kAccuracyThreshold);

MapReport map_metrics(const PointCloud& reconstructed, const PointCloud& real, double tau = kAccuracyThreshold);

/// Mean of each field over the frames where it is present.
MetricsReport aggregate(std::span<const MetricsReport> frames);

/// Header, one row per frame, then a "mean" row.
void write_metrics_csv(std::ostream& out, const std::string& method, std::span<const MetricsReport> frames);
void write_map_csv(std::ostream& out, const std::string& method, const MapReport& map);
void print_metrics_table(std::ostream& out, const std::string& method, std::span<const MetricsReport> frames,
                         const MapReport* map);

}  // namespace lidarfield
