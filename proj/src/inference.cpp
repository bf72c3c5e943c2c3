// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/inference.hpp"

#include <algorithm>

namespace lidarfield {

DepthPrediction one_step_depth(const DensityField& field, const Vec3& origin, const Vec3& dir,
                               const RayBounds& bounds, const SamplingConfig& sampling, Rng& rng) {
  RayBounds plain = bounds;
  plain.child.reset();
  const RaySamples s = render_hierarchical(field, origin, dir, segmented_sample(plain, sampling.coarse, 0.0, rng),
                                           bounds.far, sampling.fine, rng);
  DepthPrediction p;
  p.method = DepthMethod::one_step;
  p.depth = render_depth(s, bounds.full());
  p.weight_integral = integrate_weight(s, bounds.full());
  return p;
}

std::vector<Candidate> find_candidates(const Vec3& origin, const Vec3& dir, std::span<const ChildRegion> children,
                                       double inflate_step, int max_retries) {
  std::vector<Candidate> found;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const double grow = attempt * inflate_step;
    for (const ChildRegion& child : children) {
      const Aabb box = attempt == 0 ? child.box : inflate(child.box, grow);
      if (!sphere_prefilter(origin, dir, box)) continue;
      if (auto hit = ray_aabb_intersect(origin, dir, box)) found.push_back({child.segment_id, *hit});
    }
    if (!found.empty()) break;
  }
  std::stable_sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    if (a.interval.t_enter != b.interval.t_enter) return a.interval.t_enter < b.interval.t_enter;
    return a.segment_id < b.segment_id;
  });
  return found;
}

std::optional<Candidate> select_child(std::span<const Candidate> candidates, const RaySamples& samples,
                                      double min_weight) {
  if (candidates.empty()) return std::nullopt;
  const Candidate* chosen = nullptr;
  if (candidates.size() == 1) {
    chosen = &candidates.front();
  } else {
    std::size_t peak = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (peak == samples.size() || samples.weights[i] > samples.weights[peak]) peak = i;
    }
    if (peak < samples.size()) {
      for (const Candidate& c : candidates) {
        if (c.interval.contains(samples.t[peak])) {
          chosen = &c;
          break;
        }
      }
    }
    if (!chosen) {
      double best = -1.0;
      for (const Candidate& c : candidates) {
        const double w = integrate_weight(samples, c.interval);
        if (w > best) {
          best = w;
          chosen = &c;
        }
      }
    }
  }
  if (integrate_weight(samples, chosen->interval) < min_weight) return std::nullopt;
  return *chosen;
}

double normalized_depth(const RaySamples& samples, RayInterval over) {
  return render_depth(samples, over) / integrate_weight(samples, over);
}

DepthPrediction two_step_depth(const DensityField& field, const Vec3& origin, const Vec3& dir, double t0, double far,
                               std::span<const ChildRegion> children, const InferenceConfig& cfg, Rng& rng) {
  DepthPrediction p;
  p.method = DepthMethod::two_step;
  std::vector<Candidate> windows;
  for (const Candidate& c : find_candidates(origin, dir, children, cfg.inflate_step, cfg.max_retries)) {
    if (c.interval.t_enter >= far) continue;
    const double lo = std::clamp(c.interval.t_enter - cfg.inflation, t0, far);
    const double hi = std::clamp(c.interval.t_exit + cfg.inflation, lo, far);
    windows.push_back({c.segment_id, {lo, hi}});
  }
  if (windows.empty()) return p;

  std::vector<RayInterval> intervals;
  for (const Candidate& c : windows) intervals.push_back(c.interval);
  const RaySamples s =
      render_hierarchical(field, origin, dir,
                          segmented_sample(t0, far, intervals, cfg.sampling.coarse, cfg.sampling.lambda_in, rng),
                          far, cfg.sampling.fine, rng);

  const auto selected = select_child(windows, s, cfg.min_weight);
  if (!selected) {
    double best = 0.0;
    for (const Candidate& c : windows) best = std::max(best, integrate_weight(s, c.interval));
    p.weight_integral = best;
    return p;
  }
  p.selected_child = selected->segment_id;
  p.interval = selected->interval;
  p.weight_integral = integrate_weight(s, selected->interval);
  p.depth = normalized_depth(s, selected->interval);
  return p;
}

SynthesizedView synthesize_view(const Pose& pose, std::span<const Vec3> sensor_dirs, const DepthFn& predict) {
  SynthesizedView view;
  view.predictions.reserve(sensor_dirs.size());
  for (std::size_t i = 0; i < sensor_dirs.size(); ++i) {
    const Vec3 dir = (pose.rotation * sensor_dirs[i]).normalized();
    DepthPrediction p = predict(pose.translation, dir, i);
    if (p.depth) {
      view.cloud.points.push_back(pose.translation + *p.depth * dir);
    } else {
      ++view.invalid;
    }
    view.predictions.push_back(std::move(p));
  }
  return view;
}

}  // namespace lidarfield
