// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "lidarfield/types.hpp"

namespace lidarfield {

namespace {

constexpr std::size_t kLeafSize = 8;

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

std::string fmt(double v) { return fmt(std::optional<double>(v)); }

void require_nonempty(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw MetricError("point cloud metric on an empty cloud");
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (!points_.empty()) build(0, points_.size());
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[begin], hi = points_[begin];
  for (std::size_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[i]);
    hi = hi.cwiseMax(points_[i]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                   [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
  const double split = points_[mid][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const Vec3& q, double& best_sq) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) best_sq = std::min(best_sq, (points_[i] - q).squaredNorm());
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[n.axis] - n.split;
  const int near = diff < 0 ? n.left : n.right;
  const int far = diff < 0 ? n.right : n.left;
  search(near, q, best_sq);
  if (diff * diff <= best_sq) search(far, q, best_sq);
}

double KdTree::nearest_distance(const Vec3& q) const {
  if (points_.empty()) throw MetricError("nearest neighbour query on an empty tree");
  double best_sq = std::numeric_limits<double>::infinity();
  search(0, q, best_sq);
  return std::sqrt(best_sq);
}

std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  const KdTree tree(to);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = tree.nearest_distance(from[i]);
  return d;
}

DepthScores depth_metrics(std::span<const std::optional<double>> pred, std::span<const double> truth, double tau) {
  if (pred.size() != truth.size()) throw ValidationError("depth_metrics: prediction and truth counts differ");
  DepthScores s;
  s.total = pred.size();
  double err_sum = 0.0;
  std::size_t accurate = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i]) continue;
    const double e = std::abs(*pred[i] - truth[i]);
    err_sum += e;
    if (e <= tau) ++accurate;
    ++s.valid;
  }
  if (s.valid == 0) return s;
  s.dep_err = err_sum / static_cast<double>(s.valid);
  s.dep_acc = static_cast<double>(accurate) / static_cast<double>(s.valid);
  s.valid_fraction = static_cast<double>(s.valid) / static_cast<double>(s.total);
  return s;
}

ChamferResult chamfer_from(std::span<const double> ab, std::span<const double> ba) {
  if (ab.empty() || ba.empty()) throw MetricError("chamfer on an empty cloud");
  ChamferResult r;
  r.ab = std::accumulate(ab.begin(), ab.end(), 0.0) / static_cast<double>(ab.size());
  r.ba = std::accumulate(ba.begin(), ba.end(), 0.0) / static_cast<double>(ba.size());
  r.cd = (r.ab + r.ba) / 2.0;
  return r;
}

double f_score_from(std::span<const double> ab, std::span<const double> ba, double tau) {
  if (ab.empty() || ba.empty()) throw MetricError("f_score on an empty cloud");
  const auto within = [tau](std::span<const double> d) {
    return static_cast<double>(std::count_if(d.begin(), d.end(), [tau](double x) { return x <= tau; })) /
           static_cast<double>(d.size());
  };
  const double p = within(ab);
  const double r = within(ba);
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

ChamferResult chamfer(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b);
  return chamfer_from(nearest_distances(a.points, b.points), nearest_distances(b.points, a.points));
}

double f_score(const PointCloud& a, const PointCloud& b, double tau) {
  require_nonempty(a, b);
  return f_score_from(nearest_distances(a.points, b.points), nearest_distances(b.points, a.points), tau);
}

MetricsReport frame_metrics(int frame_id, std::span<const std::optional<double>> pred,
                            std::span<const double> truth, const PointCloud& synthesized, const PointCloud& real,
                            double tau) {
  MetricsReport r;
  r.frame_id = frame_id;
  const DepthScores d = depth_metrics(pred, truth, tau);
  r.dep_err = d.dep_err;
  r.dep_acc_02 = d.dep_acc;
  r.valid_fraction = d.valid_fraction;
  if (!synthesized.empty() && !real.empty()) {
    const auto ab = nearest_distances(synthesized.points, real.points);
    const auto ba = nearest_distances(real.points, synthesized.points);
    r.cd = chamfer_from(ab, ba).cd;
    r.f_02 = f_score_from(ab, ba, tau);
  }
  return r;
}

MapReport map_metrics(const PointCloud& reconstructed, const PointCloud& real, double tau) {
  require_nonempty(reconstructed, real);
  const auto ab = nearest_distances(reconstructed.points, real.points);
  const auto ba = nearest_distances(real.points, reconstructed.points);
  const ChamferResult c = chamfer_from(ab, ba);
  return {c.ab, c.ba, c.cd, f_score_from(ab, ba, tau)};
}

MetricsReport aggregate(std::span<const MetricsReport> frames) {
  MetricsReport out;
  out.frame_id = -1;
  const auto mean = [&](std::optional<double> MetricsReport::*field) -> std::optional<double> {
    double sum = 0.0;
    std::size_t n = 0;
    for (const MetricsReport& f : frames) {
      if (f.*field) {
        sum += *(f.*field);
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  out.dep_err = mean(&MetricsReport::dep_err);
  out.dep_acc_02 = mean(&MetricsReport::dep_acc_02);
  out.cd = mean(&MetricsReport::cd);
  out.f_02 = mean(&MetricsReport::f_02);
  double vf = 0.0;
  for (const MetricsReport& f : frames) vf += f.valid_fraction;
  out.valid_fraction = frames.empty() ? 0.0 : vf / static_cast<double>(frames.size());
  return out;
}

void write_metrics_csv(std::ostream& out, const std::string& method, std::span<const MetricsReport> frames) {
  out << "method,frame,dep_err,dep_acc_02,cd,f_02,valid_fraction\n";
  const auto row = [&](const std::string& frame, const MetricsReport& r) {
    out << method << ',' << frame << ',' << fmt(r.dep_err) << ',' << fmt(r.dep_acc_02) << ',' << fmt(r.cd) << ','
        << fmt(r.f_02) << ',' << fmt(r.valid_fraction) << '\n';
  };
  for (const MetricsReport& r : frames) row(std::to_string(r.frame_id), r);
  row("mean", aggregate(frames));
}

void write_map_csv(std::ostream& out, const std::string& method, const MapReport& map) {
  out << "method,acc,comp,map_cd,map_f_02\n";
  out << method << ',' << fmt(map.acc) << ',' << fmt(map.comp) << ',' << fmt(map.map_cd) << ','
      << fmt(map.map_f_02) << '\n';
}

void print_metrics_table(std::ostream& out, const std::string& method, std::span<const MetricsReport> frames,
                         const MapReport* map) {
  const auto cell = [](const std::optional<double>& v) {
    char buf[32];
    if (v)
      std::snprintf(buf, sizeof buf, "%10.4f", *v);
    else
      std::snprintf(buf, sizeof buf, "%10s", "-");
    return std::string(buf);
  };
  char head[128];
  std::snprintf(head, sizeof head, "%-8s%10s%10s%10s%10s%10s\n", "frame", "dep_err", "dep_acc", "cd", "f_0.2",
                "valid");
  out << method << '\n' << head;
  const auto line = [&](const std::string& name, const MetricsReport& r) {
    char label[16];
    std::snprintf(label, sizeof label, "%-8s", name.c_str());
    out << label << cell(r.dep_err) << cell(r.dep_acc_02) << cell(r.cd) << cell(r.f_02)
        << cell(r.valid_fraction) << '\n';
  };
  for (const MetricsReport& r : frames) line(std::to_string(r.frame_id), r);
  line("mean", aggregate(frames));
  if (map) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "map: acc %.4f  comp %.4f  cd %.4f  f_0.2 %.4f\n", map->acc, map->comp,
                  map->map_cd, map->map_f_02);
    out << buf;
  }
}

}  // namespace lidarfield
