// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/losses.hpp"

#include <cmath>

namespace lidarfield {

void LossWeights::validate() const {
  if (parent_depth < 0 || child_free < 0 || child_depth < 0) throw ConfigError("loss weights must be >= 0");
  if (!(lambda_in >= 0.0 && lambda_in <= 1.0)) throw ConfigError("lambda_in must lie in [0, 1]");
  if (inflation < 0 || transition < 0) throw ConfigError("inflation and transition must be >= 0");
}

double smooth_l1_prime(double x, double y) {
  const double d = std::abs(x - y);
  return d < 0.1 ? 5.0 * d * d : d - 0.05;
}

double smooth_l1_prime_grad(double x, double y) {
  const double diff = x - y;
  if (std::abs(diff) < 0.1) return 10.0 * diff;
  return diff > 0.0 ? 1.0 : -1.0;
}

namespace {

double windowed_depth_loss(const RaySamples& s, RayInterval window, double depth, std::span<double> grad_w,
                           double scale) {
  const double rendered = render_depth(s, window);
  const double loss = smooth_l1_prime(rendered, depth);
  if (!grad_w.empty() && scale != 0.0) {
    const double g = scale * smooth_l1_prime_grad(rendered, depth);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (window.contains(s.t[i])) grad_w[i] += g * s.t[i];
    }
  }
  return loss;
}

}  // namespace

double parent_depth_loss(const RaySamples& samples, const RayBounds& bounds, double depth, std::span<double> grad_w,
                         double scale) {
  return windowed_depth_loss(samples, bounds.full(), depth, grad_w, scale);
}

double child_free_loss(const RaySamples& samples, const RayBounds& bounds, std::span<double> grad_w, double scale) {
  const RayInterval window = bounds.child_window();
  double loss = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = samples.t[i];
    if (window.contains(t) || t < bounds.t0 || t > bounds.far) continue;
    const double w = samples.weights[i];
    loss += w * w * samples.delta[i];
    if (!grad_w.empty()) grad_w[i] += scale * 2.0 * w * samples.delta[i];
  }
  return loss;
}

double child_depth_loss(const RaySamples& samples, const RayBounds& bounds, double depth, std::span<double> grad_w,
                        double scale) {
  return windowed_depth_loss(samples, bounds.depth_window(), depth, grad_w, scale);
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  parent_depth += o.parent_depth;
  child_free += o.child_free;
  child_depth += o.child_depth;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
  return {parent_depth * s, child_free * s, child_depth * s, total * s};
}

LossBreakdown total_loss(const RaySamples& samples, const RayBounds& bounds, double depth, const LossWeights& weights,
                         std::span<double> grad_w, double scale) {
  LossBreakdown out;
  out.parent_depth = parent_depth_loss(samples, bounds, depth, grad_w, scale * weights.parent_depth);
  out.total = weights.parent_depth * out.parent_depth;
  if (bounds.child) {
    out.child_free = child_free_loss(samples, bounds, grad_w, scale * weights.child_free);
    out.child_depth = child_depth_loss(samples, bounds, depth, grad_w, scale * weights.child_depth);
    out.total += weights.child_free * out.child_free + weights.child_depth * out.child_depth;
  }
  return out;
}

}  // namespace lidarfield
