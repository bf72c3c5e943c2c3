// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lidarfield/lidar_io.hpp"
#include "lidarfield/partition.hpp"
#include "lidarfield/render.hpp"

namespace lidarfield {

enum class DepthMethod { one_step, two_step, ray_cast };

struct DepthPrediction {
  std::optional<double> depth;
  std::optional<int> selected_child;
  /// Weight integral of the interval the depth was taken from.
  double weight_integral = 0.0;
  DepthMethod method = DepthMethod::one_step;
  /// Interval the two-step depth was normalized over.
  std::optional<RayInterval> interval;
};

struct Candidate {
  int segment_id = 0;
  RayInterval interval;
};

struct InferenceConfig {
  SamplingConfig sampling;
  double inflation = 0.1;    // child bound inflation, as in training
  double min_weight = 0.05;  // W below this means the ray hit no child
  double inflate_step = 0.2;
  int max_retries = 3;
};

/// Full-ray expected depth over [t0, far] from uniform coarse plus
/// hierarchical fine sampling. Always yields a depth.
DepthPrediction one_step_depth(const DensityField& field, const Vec3& origin, const Vec3& dir,
                               const RayBounds& bounds, const SamplingConfig& sampling, Rng& rng);

/// Children whose (sphere-prefiltered) boxes the ray crosses, sorted by
/// t_enter. If none, all boxes are inflated by inflate_step and the search is
/// repeated, at most max_retries times.
std::vector<Candidate> find_candidates(const Vec3& origin, const Vec3& dir, std::span<const ChildRegion> children,
                                       double inflate_step, int max_retries);

/// Peak-weight rule, falling back to the largest weight integral; none when
/// the selected interval's weight integral is below min_weight.
std::optional<Candidate> select_child(std::span<const Candidate> candidates, const RaySamples& samples,
                                      double min_weight);

/// Weighted mean of node depths in the interval; requires non-zero weight.
double normalized_depth(const RaySamples& samples, RayInterval over);

/// Segment-to-point inference inside the selected child's inflated interval.
DepthPrediction two_step_depth(const DensityField& field, const Vec3& origin, const Vec3& dir, double t0, double far,
                               std::span<const ChildRegion> children, const InferenceConfig& cfg, Rng& rng);

using DepthFn = std::function<DepthPrediction(const Vec3& origin, const Vec3& dir, std::size_t ray_index)>;

struct SynthesizedView {
  PointCloud cloud;
  std::vector<DepthPrediction> predictions;  // one per beam
  std::size_t invalid = 0;
};

/// One point origin + depth * dir per beam with a depth. Beam directions are
/// given in the sensor frame.
SynthesizedView synthesize_view(const Pose& pose, std::span<const Vec3> sensor_dirs, const DepthFn& predict);

}  // namespace lidarfield
