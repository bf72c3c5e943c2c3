// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "lidarfield/render.hpp"

namespace lidarfield {

struct LossWeights {
  double parent_depth = 1.0;
  double child_free = 1e6;
  double child_depth = 1e5;
  double lambda_in = 0.1;
  double inflation = 0.1;   // meters
  double transition = 2.0;  // meters

  void validate() const;
};

/// 0.1 * SmoothL1(10x, 10y): quadratic below |x - y| = 0.1 m, linear above.
double smooth_l1_prime(double x, double y);
/// d/dx of smooth_l1_prime.
double smooth_l1_prime_grad(double x, double y);

// Each loss optionally accumulates scale * d(loss)/d(w_i) into grad_w.

double parent_depth_loss(const RaySamples& samples, const RayBounds& bounds, double depth,
                         std::span<double> grad_w = {}, double scale = 1.0);

/// Squared-weight quadrature sum of w_i^2 delta_i over nodes outside the
/// inflated child window. Requires a child interval.
double child_free_loss(const RaySamples& samples, const RayBounds& bounds, std::span<double> grad_w = {},
                       double scale = 1.0);

/// Depth loss over the child window widened by the transition length.
/// Requires a child interval.
double child_depth_loss(const RaySamples& samples, const RayBounds& bounds, double depth,
                        std::span<double> grad_w = {}, double scale = 1.0);

struct LossBreakdown {
  double parent_depth = 0.0;
  double child_free = 0.0;
  double child_depth = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};

/// Weighted sum; child terms apply only when bounds carry a child interval.
LossBreakdown total_loss(const RaySamples& samples, const RayBounds& bounds, double depth, const LossWeights& weights,
                         std::span<double> grad_w = {}, double scale = 1.0);

}  // namespace lidarfield
